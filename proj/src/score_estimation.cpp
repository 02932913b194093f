#include "neural_screen/score_estimation.hpp"

#include "neural_screen/errors.hpp"

#include <string>

namespace nscreen {

double rnull_loss(const NetworkModel& alpha,
                  const MatrixXd& inputs,
                  Index coord,
                  const SmoothingSpec& spec)
{
  spec.validate();
  const Index n = inputs.rows();
  if (n == 0)
    throw insufficient_samples("R-null loss needs at least one sample");
  if (coord < 0 || coord >= inputs.cols())
    throw shape_error("score coordinate out of range");

  const double square_term = forward_rows(alpha, inputs).squaredNorm();
  const std::vector<Index> in = interior_indices(inputs.col(coord), spec);
  double deriv_term = 0.0;
  if (!in.empty()) {
    const MatrixXd interior = select_rows(inputs, in);
    const std::vector<double> a = spec.nodes();
    const std::vector<double> w = spec.weights();
    MatrixXd shifted = interior;
    for (std::size_t l = 0; l < a.size(); ++l) {
      shifted.col(coord) =
        interior.col(coord).array() - a[l] * spec.bandwidth;
      deriv_term += w[l] * forward_rows(alpha, shifted).sum();
    }
  }
  return (square_term - 2.0 * deriv_term) / static_cast<double>(n);
}

namespace {

//! Minibatch version of the R-null loss on standardized columns. The
//! derivative term of a batch is divided by the batch size, mirroring the
//! division by n in the full loss.
class RieszObjective : public TrainingObjective
{
public:
  RieszObjective(MatrixXd columns,
                 std::vector<bool> interior,
                 Index coord,
                 const SmoothingSpec& spec,
                 double coord_scale)
    : columns_(std::move(columns))
    , interior_(std::move(interior))
    , coord_(coord)
  {
    for (double a : spec.nodes())
      offsets_.push_back(a * spec.bandwidth / coord_scale);
    weights_ = spec.weights();
  }

  std::size_t sample_count() const override { return interior_.size(); }

  double evaluate(const NetworkModel& model,
                  std::span<const std::size_t> rows,
                  ParameterGradient* grad) override
  {
    const Index b = static_cast<Index>(rows.size());
    const Index g = static_cast<Index>(offsets_.size());
    Index inside = 0;
    for (std::size_t r : rows)
      inside += interior_[r] ? 1 : 0;

    batch_.resize(columns_.rows(), b + inside * g);
    Index col = b;
    for (Index k = 0; k < b; ++k) {
      const Index r = static_cast<Index>(rows[k]);
      batch_.col(k) = columns_.col(r);
      if (!interior_[rows[k]])
        continue;
      const double x = columns_(coord_, r);
      for (Index l = 0; l < g; ++l, ++col) {
        batch_.col(col) = columns_.col(r);
        batch_(coord_, col) = x - offsets_[l];
      }
    }

    const RowVectorXd& out = pass_.run(model, batch_);
    const double inv_b = 1.0 / static_cast<double>(b);
    double square = out.head(b).squaredNorm();
    double deriv = 0.0;
    for (Index q = 0; q < inside; ++q)
      for (Index l = 0; l < g; ++l)
        deriv += weights_[l] * out(b + q * g + l);

    if (grad != nullptr) {
      out_grad_.resize(out.size());
      out_grad_.head(b) = (2.0 * inv_b) * out.head(b);
      for (Index q = 0; q < inside; ++q)
        for (Index l = 0; l < g; ++l)
          out_grad_(b + q * g + l) = -2.0 * inv_b * weights_[l];
      pass_.backprop(model, out_grad_, *grad);
    }
    return (square - 2.0 * deriv) * inv_b;
  }

private:
  MatrixXd columns_;
  std::vector<bool> interior_;
  Index coord_;
  std::vector<double> offsets_;
  std::vector<double> weights_;
  BatchPass pass_;
  MatrixXd batch_;
  RowVectorXd out_grad_;
};

} // namespace

ScoreFit train_score(const MatrixXd& inputs,
                     Index coord,
                     const NetworkArchitecture& arch,
                     const TrainConfig& cfg,
                     const SmoothingSpec& spec,
                     std::optional<InputScaling> scaling)
{
  arch.validate();
  spec.validate();
  if (inputs.cols() != arch.input_dim)
    throw shape_error("input has " + std::to_string(inputs.cols()) +
                      " columns, architecture expects " +
                      std::to_string(arch.input_dim));
  if (coord < 0 || coord >= inputs.cols())
    throw shape_error("score coordinate out of range");
  cfg.validate(static_cast<std::size_t>(inputs.rows()));

  Rng init_rng(derive_seed(cfg.rng_seed, "init"));
  NetworkModel model = initialize_network(
    arch, scaling ? *scaling : InputScaling::fit(inputs), init_rng);

  std::vector<bool> interior(static_cast<std::size_t>(inputs.rows()));
  for (Index i = 0; i < inputs.rows(); ++i)
    interior[static_cast<std::size_t>(i)] = spec.interior(inputs(i, coord));

  RieszObjective objective(model.standardize_columns(inputs),
                           std::move(interior),
                           coord,
                           spec,
                           model.scaling.scale(coord));
  TrainedNetwork trained = minimize(std::move(model), objective, cfg);
  return ScoreFit{ std::move(trained.model), spec, std::move(trained.trace) };
}

} // namespace nscreen
