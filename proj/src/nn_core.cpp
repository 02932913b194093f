#include "neural_screen/nn_core.hpp"

#include "neural_screen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace nscreen {

void NetworkArchitecture::validate() const
{
  if (input_dim < 1)
    throw shape_error("network input_dim must be positive");
  if (hidden_layers < 1)
    throw shape_error("network needs at least one hidden layer");
  if (hidden_width < 1)
    throw shape_error("hidden_width must be positive");
  if (!(truncation_level > 0.0))
    throw shape_error("truncation level must be positive");
}

InputScaling InputScaling::identity(Index dim)
{
  return { VectorXd::Zero(dim), VectorXd::Ones(dim) };
}

InputScaling InputScaling::fit(const MatrixXd& rows)
{
  if (rows.rows() == 0)
    throw insufficient_samples("cannot fit an input scaling on zero rows");
  VectorXd lo = rows.colwise().minCoeff().transpose();
  VectorXd hi = rows.colwise().maxCoeff().transpose();
  InputScaling s;
  s.shift = 0.5 * (lo + hi);
  s.scale = 0.5 * (hi - lo);
  for (Index k = 0; k < s.scale.size(); ++k) {
    if (!(s.scale(k) > 0.0))
      s.scale(k) = 1.0;
  }
  return s;
}

NetworkModel NetworkModel::zeros(const NetworkArchitecture& arch)
{
  arch.validate();
  NetworkModel m;
  m.architecture = arch;
  const int k = arch.hidden_width;
  m.weights.push_back(MatrixXd::Zero(k, arch.input_dim));
  m.biases.push_back(VectorXd::Zero(k));
  for (int l = 1; l < arch.hidden_layers; ++l) {
    m.weights.push_back(MatrixXd::Zero(k, k));
    m.biases.push_back(VectorXd::Zero(k));
  }
  m.weights.push_back(MatrixXd::Zero(1, k));
  m.biases.push_back(VectorXd::Zero(1));
  m.scaling = InputScaling::identity(arch.input_dim);
  return m;
}

std::size_t NetworkModel::parameter_count() const
{
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    count += weights[l].size() + biases[l].size();
  return count;
}

void NetworkModel::audit_shapes() const
{
  architecture.validate();
  const auto& a = architecture;
  if (layer_count() != a.hidden_layers + 1 ||
      biases.size() != weights.size())
    throw shape_error("expected " + std::to_string(a.hidden_layers + 1) +
                      " affine layers, found " +
                      std::to_string(weights.size()));
  Index fan_in = a.input_dim;
  for (int l = 0; l < layer_count(); ++l) {
    const Index fan_out = (l == a.hidden_layers) ? 1 : a.hidden_width;
    if (weights[l].rows() != fan_out || weights[l].cols() != fan_in ||
        biases[l].size() != fan_out)
      throw shape_error("layer " + std::to_string(l) +
                        " does not match the architecture");
    fan_in = fan_out;
  }
  if (scaling.shift.size() != a.input_dim ||
      scaling.scale.size() != a.input_dim)
    throw shape_error("input scaling does not match input_dim");
}

MatrixXd NetworkModel::standardize_columns(const MatrixXd& rows) const
{
  if (rows.cols() != architecture.input_dim)
    throw shape_error("input has " + std::to_string(rows.cols()) +
                      " columns, network expects " +
                      std::to_string(architecture.input_dim));
  MatrixXd cols = rows.transpose();
  cols.colwise() -= scaling.shift;
  cols.array().colwise() /= scaling.scale.array();
  return cols;
}

ParameterGradient ParameterGradient::zeros_like(const NetworkModel& model)
{
  ParameterGradient g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.weights.push_back(MatrixXd::Zero(model.weights[l].rows(),
                                       model.weights[l].cols()));
    g.biases.push_back(VectorXd::Zero(model.biases[l].size()));
  }
  return g;
}

void ParameterGradient::set_zero()
{
  for (auto& w : weights)
    w.setZero();
  for (auto& b : biases)
    b.setZero();
}

// ---------------------------------------------------------------------------

const RowVectorXd& BatchPass::run(const NetworkModel& model,
                                  const MatrixXd& columns)
{
  input_ = &columns;
  const int hidden = model.layer_count() - 1;
  hidden_.resize(hidden);
  const MatrixXd* prev = &columns;
  for (int l = 0; l < hidden; ++l) {
    MatrixXd& z = hidden_[l];
    z.noalias() = model.weights[l] * (*prev);
    z.colwise() += model.biases[l];
    z = z.cwiseMax(0.0);
    prev = &z;
  }
  raw_.noalias() = model.weights[hidden] * (*prev);
  raw_.array() += model.biases[hidden](0);
  const double m = model.truncation();
  out_ = raw_.cwiseMax(-m).cwiseMin(m);
  return out_;
}

void BatchPass::backprop(const NetworkModel& model,
                         const RowVectorXd& output_grad,
                         ParameterGradient& grad)
{
  const int hidden = model.layer_count() - 1;
  const double m = model.truncation();
  // straight-through inside (-M, M), zero outside
  delta_ = (raw_.array().abs() < m).select(output_grad.array(), 0.0).matrix();
  grad.weights[hidden].noalias() += delta_ * hidden_[hidden - 1].transpose();
  grad.biases[hidden](0) += delta_.sum();
  for (int l = hidden - 1; l >= 0; --l) {
    delta_next_.noalias() = model.weights[l + 1].transpose() * delta_;
    delta_next_ =
      (hidden_[l].array() > 0.0).select(delta_next_.array(), 0.0).matrix();
    const MatrixXd& prev = (l == 0) ? *input_ : hidden_[l - 1];
    grad.weights[l].noalias() += delta_next_ * prev.transpose();
    grad.biases[l] += delta_next_.rowwise().sum();
    delta_.swap(delta_next_);
  }
}

MatrixXd BatchPass::input_gradient(const NetworkModel& model)
{
  const int hidden = model.layer_count() - 1;
  const double m = model.truncation();
  delta_ = (raw_.array().abs() < m).cast<double>().matrix();
  for (int l = hidden - 1; l >= 0; --l) {
    delta_next_.noalias() = model.weights[l + 1].transpose() * delta_;
    delta_next_ =
      (hidden_[l].array() > 0.0).select(delta_next_.array(), 0.0).matrix();
    delta_.swap(delta_next_);
  }
  return model.weights[0].transpose() * delta_;
}

// ---------------------------------------------------------------------------

namespace {

MatrixXd single_row(const NetworkModel& model, const VectorXd& x)
{
  if (x.size() != model.architecture.input_dim)
    throw shape_error("input vector has length " + std::to_string(x.size()) +
                      ", network expects " +
                      std::to_string(model.architecture.input_dim));
  return x.transpose();
}

constexpr Index kForwardChunk = 1 << 15;

} // namespace

VectorXd forward_rows(const NetworkModel& model, const MatrixXd& rows)
{
  if (rows.cols() != model.architecture.input_dim)
    throw shape_error("input has " + std::to_string(rows.cols()) +
                      " columns, network expects " +
                      std::to_string(model.architecture.input_dim));
  VectorXd out(rows.rows());
  BatchPass pass;
  for (Index start = 0; start < rows.rows(); start += kForwardChunk) {
    const Index len = std::min(kForwardChunk, rows.rows() - start);
    MatrixXd cols = model.standardize_columns(rows.middleRows(start, len));
    out.segment(start, len) = pass.run(model, cols).transpose();
  }
  return out;
}

double forward(const NetworkModel& model, const VectorXd& x)
{
  return forward_rows(model, single_row(model, x))(0);
}

double raw_output(const NetworkModel& model, const VectorXd& x)
{
  MatrixXd a = model.standardize_columns(single_row(model, x));
  MatrixXd z;
  for (int l = 0; l + 1 < model.layer_count(); ++l) {
    z = model.weights[l] * a;
    z.colwise() += model.biases[l];
    a = z.cwiseMax(0.0);
  }
  return (model.weights.back() * a)(0, 0) + model.biases.back()(0);
}

VectorXd input_partials(const NetworkModel& model,
                        const MatrixXd& rows,
                        Index coord)
{
  if (coord < 0 || coord >= model.architecture.input_dim)
    throw shape_error("derivative coordinate out of range");
  VectorXd out(rows.rows());
  BatchPass pass;
  for (Index start = 0; start < rows.rows(); start += kForwardChunk) {
    const Index len = std::min(kForwardChunk, rows.rows() - start);
    MatrixXd cols = model.standardize_columns(rows.middleRows(start, len));
    pass.run(model, cols);
    out.segment(start, len) = pass.input_gradient(model).row(coord).transpose();
  }
  return out / model.scaling.scale(coord);
}

double input_partial(const NetworkModel& model, const VectorXd& x, Index coord)
{
  return input_partials(model, single_row(model, x), coord)(0);
}

ParameterGradient parameter_gradient(const NetworkModel& model,
                                     const MatrixXd& inputs,
                                     const VectorXd& targets)
{
  if (inputs.rows() == 0 || inputs.rows() != targets.size())
    throw shape_error("batch must be nonempty with one target per row");
  const MatrixXd cols = model.standardize_columns(inputs);
  BatchPass pass;
  const RowVectorXd& out = pass.run(model, cols);
  const double n = static_cast<double>(inputs.rows());
  RowVectorXd g = (2.0 / n) * (out - targets.transpose());
  ParameterGradient grad = ParameterGradient::zeros_like(model);
  pass.backprop(model, g, grad);
  return grad;
}

double mean_squared_error(const NetworkModel& model,
                          const MatrixXd& inputs,
                          const VectorXd& targets)
{
  if (inputs.rows() != targets.size())
    throw shape_error("one target per input row required");
  return (forward_rows(model, inputs) - targets).squaredNorm() /
         static_cast<double>(targets.size());
}

// ---------------------------------------------------------------------------

void TrainConfig::validate(std::size_t samples) const
{
  if (epochs < 1)
    throw screen_error("epochs must be positive");
  if (batch_size < 1)
    throw screen_error("batch_size must be positive");
  if (!(learning_rate > 0.0))
    throw screen_error("learning_rate must be positive");
  if (patience < 0)
    throw screen_error("patience must be nonnegative");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw screen_error("validation_fraction must lie in (0, 1)");
  if (samples < 2)
    throw insufficient_samples("training needs at least 2 samples");
}

namespace {

struct AdamState
{
  ParameterGradient m;
  ParameterGradient v;
  long step = 0;

  explicit AdamState(const NetworkModel& model)
    : m(ParameterGradient::zeros_like(model))
    , v(ParameterGradient::zeros_like(model))
  {}

  void apply(NetworkModel& model, const ParameterGradient& g, double lr)
  {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    auto update = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
      mom = b1 * mom + (1.0 - b1) * grad;
      vel = b2 * vel + (1.0 - b2) * grad.cwiseAbs2();
      param.array() -= lr * (mom.array() / c1) /
                       ((vel.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      update(model.weights[l], m.weights[l], v.weights[l], g.weights[l]);
      update(model.biases[l], m.biases[l], v.biases[l], g.biases[l]);
    }
  }
};

class SquaredErrorObjective : public TrainingObjective
{
public:
  SquaredErrorObjective(MatrixXd columns, VectorXd targets)
    : columns_(std::move(columns))
    , targets_(std::move(targets))
  {}

  std::size_t sample_count() const override { return targets_.size(); }

  double evaluate(const NetworkModel& model,
                  std::span<const std::size_t> rows,
                  ParameterGradient* grad) override
  {
    const Index b = static_cast<Index>(rows.size());
    batch_.resize(columns_.rows(), b);
    resid_.resize(b);
    for (Index k = 0; k < b; ++k)
      batch_.col(k) = columns_.col(static_cast<Index>(rows[k]));
    const RowVectorXd& out = pass_.run(model, batch_);
    for (Index k = 0; k < b; ++k)
      resid_(k) = out(k) - targets_(static_cast<Index>(rows[k]));
    if (grad != nullptr) {
      RowVectorXd g = (2.0 / static_cast<double>(b)) * resid_;
      pass_.backprop(model, g, *grad);
    }
    return resid_.squaredNorm() / static_cast<double>(b);
  }

private:
  MatrixXd columns_;
  VectorXd targets_;
  BatchPass pass_;
  MatrixXd batch_;
  RowVectorXd resid_;
};

} // namespace

NetworkModel initialize_network(const NetworkArchitecture& arch,
                                InputScaling scaling,
                                Rng& rng)
{
  NetworkModel m = NetworkModel::zeros(arch);
  m.scaling = std::move(scaling);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& w : m.weights) {
    const double sd = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r)
        w(r, c) = sd * normal(rng);
  }
  m.audit_shapes();
  return m;
}

TrainedNetwork minimize(NetworkModel initial,
                        TrainingObjective& objective,
                        const TrainConfig& cfg)
{
  const std::size_t n = objective.sample_count();
  cfg.validate(n);
  Rng rng(cfg.rng_seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  std::shuffle(order.begin(), order.end(), rng);
  long n_val = std::lround(cfg.validation_fraction * static_cast<double>(n));
  n_val = std::clamp<long>(n_val, 1, static_cast<long>(n) - 1);
  const std::size_t n_train = n - static_cast<std::size_t>(n_val);
  std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
  const std::vector<std::size_t> val(order.begin() + n_train, order.end());

  TrainedNetwork result;
  NetworkModel model = std::move(initial);
  ParameterGradient grad = ParameterGradient::zeros_like(model);
  AdamState adam(model);

  double best = objective.evaluate(model, val, nullptr);
  if (!std::isfinite(best))
    throw training_diverged(0, "non-finite validation loss at initialization");
  result.model = model;
  result.trace.initial_validation_loss = best;
  int since_best = 0;

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += bs) {
      const std::size_t len = std::min(bs, n_train - start);
      std::span<const std::size_t> batch(train.data() + start, len);
      grad.set_zero();
      const double loss = objective.evaluate(model, batch, &grad);
      if (!std::isfinite(loss))
        throw training_diverged(epoch,
                                "non-finite training loss at epoch " +
                                  std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(len);
      adam.apply(model, grad, cfg.learning_rate);
    }
    const double vloss = objective.evaluate(model, val, nullptr);
    if (!std::isfinite(vloss))
      throw training_diverged(epoch,
                              "non-finite validation loss at epoch " +
                                std::to_string(epoch));
    result.trace.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    result.trace.validation_loss.push_back(vloss);
    result.trace.epochs_run = epoch;
    if (vloss < best) {
      best = vloss;
      result.model = model;
      result.trace.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  result.trace.best_validation_loss = best;
  return result;
}

TrainedNetwork train_regressor(const MatrixXd& inputs,
                               const VectorXd& targets,
                               const NetworkArchitecture& arch,
                               const TrainConfig& cfg,
                               std::optional<InputScaling> scaling)
{
  arch.validate();
  if (inputs.rows() != targets.size())
    throw shape_error("one target per input row required");
  if (inputs.cols() != arch.input_dim)
    throw shape_error("input has " + std::to_string(inputs.cols()) +
                      " columns, architecture expects " +
                      std::to_string(arch.input_dim));
  cfg.validate(static_cast<std::size_t>(inputs.rows()));
  if (!targets.allFinite())
    throw degenerate_input("regression targets must be finite");

  Rng init_rng(derive_seed(cfg.rng_seed, "init"));
  NetworkModel model = initialize_network(
    arch, scaling ? *scaling : InputScaling::fit(inputs), init_rng);
  // start the readout at the target mean
  model.biases.back()(0) = targets.mean();

  SquaredErrorObjective objective(model.standardize_columns(inputs), targets);
  return minimize(std::move(model), objective, cfg);
}

NetworkModel build_sawtooth(int depth)
{
  if (depth < 1)
    throw shape_error("sawtooth depth must be at least 1");
  NetworkArchitecture arch{ 1, depth, 3, 10.0 };
  NetworkModel m = NetworkModel::zeros(arch);
  const Eigen::Vector3d knots(0.0, -0.5, -1.0);
  const Eigen::RowVector3d zeta(2.0, -4.0, 2.0);
  m.weights[0] = Eigen::Vector3d::Ones();
  m.biases[0] = knots;
  for (int l = 1; l < depth; ++l) {
    // each row recomputes zeta of the previous layer, then re-applies a knot
    m.weights[l] = Eigen::Vector3d::Ones() * zeta;
    m.biases[l] = knots;
  }
  m.weights[depth] = (2.0 / std::ldexp(1.0, depth)) * zeta;
  m.biases[depth].setZero();
  return m;
}

} // namespace nscreen
