#pragma once

#include "neural_screen/kernel_smoothing.hpp"
#include "neural_screen/nn_core.hpp"

#include <vector>

namespace nscreen {

struct ScoreFit
{
  NetworkModel model;
  SmoothingSpec spec;
  TrainingTrace trace;
  //! Per-epoch mean training loss (equal to trace.train_loss).
  const std::vector<double>& loss_trace() const { return trace.train_loss; }
};

//! Empirical null Riesz loss
//!   (1/n) sum_i a(x_i)^2 - (2/n) sum_{i interior} a^s_j(x_i),
//! with the smoothed derivative summed in the factored form
//!   (1/n) sum_l w_l sum_{i interior} a(z_i, x_ij - a_l h)
//! over the quadrature nodes and weights of `spec`.
double rnull_loss(const NetworkModel& alpha,
                  const MatrixXd& inputs,
                  Index coord,
                  const SmoothingSpec& spec);

//! Minimizes rnull_loss over the network class. The response never enters.
ScoreFit train_score(const MatrixXd& inputs,
                     Index coord,
                     const NetworkArchitecture& arch,
                     const TrainConfig& cfg,
                     const SmoothingSpec& spec,
                     std::optional<InputScaling> scaling = {});

} // namespace nscreen
