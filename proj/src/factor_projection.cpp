#include "neural_screen/factor_projection.hpp"

#include "neural_screen/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace nscreen {

namespace {

constexpr Index kCovarianceLimit = 2000;

void fix_signs(MatrixXd& u)
{
  for (Index c = 0; c < u.cols(); ++c) {
    Index arg = 0;
    u.col(c).cwiseAbs().maxCoeff(&arg);
    if (u(arg, c) < 0.0)
      u.col(c) *= -1.0;
  }
}

} // namespace

DiversifiedProjector pretrain_projector(const MatrixXd& reserved, Index rbar)
{
  const Index m = reserved.rows();
  const Index d = reserved.cols();
  if (rbar < 1)
    throw screen_error("factor bound rbar must be positive");
  if (m < rbar)
    throw insufficient_samples("pretraining needs at least rbar = " +
                               std::to_string(rbar) + " rows, got " +
                               std::to_string(m));
  if (d < rbar)
    throw shape_error("rbar exceeds the ambient dimension");

  MatrixXd centered = reserved.rowwise() - reserved.colwise().mean();
  if (centered.cwiseAbs().maxCoeff() == 0.0)
    throw degenerate_input("reserved sample has zero covariance");

  MatrixXd u;
  if (d <= kCovarianceLimit) {
    const MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(std::max<Index>(m - 1, 1));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
      throw degenerate_input("covariance eigendecomposition failed");
    // eigenvalues ascend
    u = eig.eigenvectors().rightCols(rbar).rowwise().reverse();
  } else {
    const MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
      throw degenerate_input("Gram eigendecomposition failed");
    const VectorXd lambda = eig.eigenvalues().tail(rbar).reverse();
    const MatrixXd v = eig.eigenvectors().rightCols(rbar).rowwise().reverse();
    const double floor = 1e-12 * std::max(lambda(0), 1e-300);
    if ((lambda.array() <= floor).any())
      throw degenerate_input("reserved sample spans fewer than rbar directions");
    u = centered.transpose() * v;
    u.array().rowwise() /= lambda.transpose().array().sqrt();
  }
  fix_signs(u);

  DiversifiedProjector proj;
  proj.W = std::sqrt(static_cast<double>(d)) * u;
  proj.ambient_dim = d;
  proj.factor_bound = rbar;
  proj.reserved_count = m;
  return proj;
}

VectorXd diversify(const DiversifiedProjector& proj, const VectorXd& x)
{
  if (x.size() != proj.ambient_dim)
    throw shape_error("vector of length " + std::to_string(x.size()) +
                      " cannot be diversified by a projector of dimension " +
                      std::to_string(proj.ambient_dim));
  return proj.W.transpose() * x / static_cast<double>(proj.ambient_dim);
}

MatrixXd diversify_rows(const DiversifiedProjector& proj, const MatrixXd& rows)
{
  if (rows.cols() != proj.ambient_dim)
    throw shape_error("rows have " + std::to_string(rows.cols()) +
                      " columns, projector expects " +
                      std::to_string(proj.ambient_dim));
  return rows * proj.W / static_cast<double>(proj.ambient_dim);
}

} // namespace nscreen
