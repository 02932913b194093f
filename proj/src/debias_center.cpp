#include "neural_screen/debias_center.hpp"

#include "neural_screen/errors.hpp"

#include <cmath>

namespace nscreen {

DeltaEstimate delta_hat(const VectorXd& residuals, const VectorXd& score_values)
{
  if (residuals.size() != score_values.size())
    throw shape_error("residuals and score values differ in length");
  const double denom = score_values.squaredNorm();
  if (!(denom > 0.0))
    return { 0.0, true };
  const double delta = residuals.dot(score_values) / denom;
  if (!std::isfinite(delta))
    return { 0.0, true };
  return { delta, false };
}

double CenteredEstimator::evaluate(const VectorXd& x) const
{
  return forward(base, x) + delta * forward(score, x);
}

VectorXd CenteredEstimator::evaluate_rows(const MatrixXd& rows) const
{
  return forward_rows(base, rows) + delta * forward_rows(score, rows);
}

CenteredEstimator center(NetworkModel base, NetworkModel score, double delta)
{
  if (base.architecture.input_dim != score.architecture.input_dim)
    throw shape_error("base and score networks take different input sizes");
  if (!std::isfinite(delta))
    throw screen_error("centering step must be finite");
  return { std::move(base), std::move(score), delta };
}

} // namespace nscreen
