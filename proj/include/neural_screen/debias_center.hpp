#pragma once

#include "neural_screen/nn_core.hpp"

namespace nscreen {

struct DeltaEstimate
{
  double delta = 0.0;
  //! Set when every score value is zero; delta is then forced to 0.
  bool degenerate = false;
};

//! Least-squares step sum(r_i s_i) / sum(s_i^2) along the score direction.
DeltaEstimate delta_hat(const VectorXd& residuals, const VectorXd& score_values);

//! g_check = base + delta * score.
struct CenteredEstimator
{
  NetworkModel base;
  NetworkModel score;
  double delta = 0.0;

  double evaluate(const VectorXd& x) const;
  VectorXd evaluate_rows(const MatrixXd& rows) const;
};

CenteredEstimator center(NetworkModel base, NetworkModel score, double delta);

} // namespace nscreen
