#pragma once

#include "neural_screen/nn_core.hpp"

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

namespace nscreen {

//! Quartic (biweight) kernel (15/16)(1 - u^2)^2 on [-1, 1].
double kernel_eval(double u);
//! Derivative of the quartic kernel, -(15/4) u (1 - u^2) on [-1, 1].
double kernel_deriv(double u);

struct SmoothingSpec
{
  double bandwidth = 1.0;
  int grid_size = 50;
  //! Support bound b of the smoothed coordinate; data assumed in [-b, b].
  double half_width = 1.0;

  void validate() const;
  //! Midpoints a_l = -1 - 1/(2N) + l/N, l = 1..2N.
  std::vector<double> midpoints() const;
  //! Quadrature nodes: the 2N midpoints followed by the endpoints -1 and +1.
  std::vector<double> nodes() const;
  //! Weights matching `nodes()`: Kdot(a_l) / (N h) on the midpoints, and
  //! -+ Kddot(1) / (24 N^2 h) on the endpoints. The endpoint pair cancels
  //! the O(N^-2) term of the midpoint rule (Kdot vanishes at +-1, its
  //! derivative does not), so polynomials of degree <= 4 come out within
  //! ~1e-7 at N = 50.
  std::vector<double> weights() const;
  double interior_lo() const { return -half_width + bandwidth; }
  double interior_hi() const { return half_width - bandwidth; }
  bool interior(double x) const
  {
    return x >= interior_lo() && x <= interior_hi();
  }
};

//! Function of a full input point; the smoothed coordinate is given separately.
using PointFunction = std::function<double(const VectorXd&)>;
//! Vectorized function, one output per row.
using BatchFunction = std::function<VectorXd(const MatrixXd&)>;

//! (1/(N h)) sum_l Kdot(a_l) f(..., x_j - a_l h, ...) plus the endpoint
//! correction, approximating (1/h) int Kdot(a) f(x_j - a h) da. Throws
//! boundary_violation when x_j is outside [-b + h, b - h].
double smoothed_partial(const PointFunction& f,
                        const VectorXd& point,
                        Index coord,
                        const SmoothingSpec& spec);

//! Batched smoothed partials at every row of `points` (all must be interior).
VectorXd smoothed_partials(const BatchFunction& f,
                           const MatrixXd& points,
                           Index coord,
                           const SmoothingSpec& spec);

VectorXd smoothed_partials(const NetworkModel& model,
                           const MatrixXd& points,
                           Index coord,
                           const SmoothingSpec& spec);

//! Indices i with -b + h <= x_i <= b - h. The bandwidth may be zero here.
std::vector<Index> interior_indices(const VectorXd& x_col,
                                    const SmoothingSpec& spec);

MatrixXd select_rows(const MatrixXd& m, const std::vector<Index>& rows);
VectorXd select_rows(const VectorXd& v, const std::vector<Index>& rows);

struct CvResult
{
  std::vector<double> bandwidths;
  std::vector<double> scores;
  double best_bandwidth = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
};

struct CvSettings
{
  std::vector<double> candidates;
  int folds = 5;
  int grid_size = 50;
  //! Support bound; computed as max |x_j| when not positive.
  double half_width = 0.0;
  //! Minimum fold size for the within-fold fits.
  int min_fold_size = 8;
};

//! Cross-validated bandwidth for the smoothed derivative in `coord`.
//! CV(h) sums, over folds k and interior points of fold k, the squared gap
//! between the leave-fold-out smoothed derivative at h and the within-fold
//! raw derivative. CV(h) is +inf when no fold point is interior. Ties go to
//! the larger h.
CvResult cv_bandwidth(const MatrixXd& inputs,
                      const VectorXd& targets,
                      Index coord,
                      const CvSettings& settings,
                      const NetworkArchitecture& arch,
                      const TrainConfig& cfg);

//! Picks the minimizing h from a CV table, ties toward the larger h.
void select_bandwidth(CvResult& table);

} // namespace nscreen
