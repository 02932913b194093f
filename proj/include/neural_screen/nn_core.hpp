#pragma once

#include "neural_screen/rng.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nscreen {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

struct NetworkArchitecture
{
  int input_dim = 1;
  int hidden_layers = 1;
  int hidden_width = 1;
  double truncation_level = 1.0;

  void validate() const;
};

//! Per-column affine map x -> (x - shift) / scale applied before the first layer.
struct InputScaling
{
  VectorXd shift;
  VectorXd scale;

  static InputScaling identity(Index dim);
  //! Maps the empirical range of every column onto [-1, 1].
  static InputScaling fit(const MatrixXd& rows);
};

//! Fully connected ReLU network T_M(L_{L+1} o relu o ... o L_1) with a fixed
//! input standardization. Weights are stored layer by layer, input to output.
struct NetworkModel
{
  NetworkArchitecture architecture;
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
  InputScaling scaling;

  static NetworkModel zeros(const NetworkArchitecture& arch);

  int layer_count() const { return static_cast<int>(weights.size()); }
  double truncation() const { return architecture.truncation_level; }
  std::size_t parameter_count() const;
  //! Throws shape_error when the weight/bias chain does not match the architecture.
  void audit_shapes() const;
  //! Standardized copy of `rows` laid out one sample per column.
  MatrixXd standardize_columns(const MatrixXd& rows) const;
};

//! Same layout as the model parameters.
struct ParameterGradient
{
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;

  static ParameterGradient zeros_like(const NetworkModel& model);
  void set_zero();
};

double forward(const NetworkModel& model, const VectorXd& x);
//! One output per row of `rows`.
VectorXd forward_rows(const NetworkModel& model, const MatrixXd& rows);
//! Network output before the truncation T_M.
double raw_output(const NetworkModel& model, const VectorXd& x);

//! Partial derivative of the (truncated) network in input `coord`, on the
//! original input scale. Zero where the truncation is active.
double input_partial(const NetworkModel& model, const VectorXd& x, Index coord);
VectorXd input_partials(const NetworkModel& model, const MatrixXd& rows, Index coord);

//! Gradient of the mean squared error over the batch.
ParameterGradient parameter_gradient(const NetworkModel& model,
                                     const MatrixXd& inputs,
                                     const VectorXd& targets);
double mean_squared_error(const NetworkModel& model,
                          const MatrixXd& inputs,
                          const VectorXd& targets);

//! Forward/backward pass over a block of standardized input columns. Buffers
//! are reused between calls, so one instance serves one training run.
class BatchPass
{
public:
  //! Returns the truncated outputs, one per column.
  const RowVectorXd& run(const NetworkModel& model, const MatrixXd& columns);
  //! Accumulates d(loss)/d(params) given d(loss)/d(output) for the last run.
  void backprop(const NetworkModel& model,
                const RowVectorXd& output_grad,
                ParameterGradient& grad);
  //! d(output)/d(standardized input) for every column of the last run.
  MatrixXd input_gradient(const NetworkModel& model);

private:
  const MatrixXd* input_ = nullptr;
  std::vector<MatrixXd> hidden_;
  RowVectorXd raw_;
  RowVectorXd out_;
  MatrixXd delta_;
  MatrixXd delta_next_;
};

struct TrainConfig
{
  int epochs = 800;
  int batch_size = 256;
  double learning_rate = 0.005;
  //! Epochs without validation improvement before stopping; 0 disables.
  int patience = 20;
  double validation_fraction = 0.2;
  std::uint64_t rng_seed = 0;

  void validate(std::size_t samples) const;
};

struct TrainingTrace
{
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  double initial_validation_loss = 0.0;
  double best_validation_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct TrainedNetwork
{
  NetworkModel model;
  TrainingTrace trace;
};

//! Loss over a subset of samples. `evaluate` returns the mean loss of the
//! given rows and, when `grad` is non-null, adds the gradient of that mean.
class TrainingObjective
{
public:
  virtual ~TrainingObjective() = default;
  virtual std::size_t sample_count() const = 0;
  virtual double evaluate(const NetworkModel& model,
                          std::span<const std::size_t> rows,
                          ParameterGradient* grad) = 0;
};

//! Adam with early stopping on a held-out split (the last
//! `validation_fraction` of a seeded shuffle). Returns the best checkpoint.
TrainedNetwork minimize(NetworkModel initial,
                        TrainingObjective& objective,
                        const TrainConfig& cfg);

//! He-normal weights, zero biases.
NetworkModel initialize_network(const NetworkArchitecture& arch,
                                InputScaling scaling,
                                Rng& rng);

//! Least-squares fit of a truncated ReLU network. Inputs are standardized
//! with `scaling` (fitted on `inputs` when absent).
TrainedNetwork train_regressor(const MatrixXd& inputs,
                               const VectorXd& targets,
                               const NetworkArchitecture& arch,
                               const TrainConfig& cfg,
                               std::optional<InputScaling> scaling = {});

//! Depth-L network with three nodes per layer computing the scaled iterated
//! triangle map (2 / 2^L) * zeta o ... o zeta on [0, 1], zero outside.
NetworkModel build_sawtooth(int depth);

} // namespace nscreen
