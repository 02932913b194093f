#include <doctest.h>

#include "neural_screen/errors.hpp"
#include "neural_screen/score_estimation.hpp"

#include <cmath>
#include <random>

using namespace nscreen;

namespace {

NetworkModel constant_net(int d, double c)
{
  NetworkModel m = NetworkModel::zeros({ d, 1, 2, 1e6 });
  m.biases.back()(0) = c;
  return m;
}

// relu(x) - relu(-x) in the last input
NetworkModel identity_net(int d)
{
  NetworkModel m = NetworkModel::zeros({ d, 1, 2, 1e6 });
  m.weights[0](0, d - 1) = 1.0;
  m.weights[0](1, d - 1) = -1.0;
  m.weights[1](0, 0) = 1.0;
  m.weights[1](0, 1) = -1.0;
  return m;
}

MatrixXd uniform_inputs(Index n, int d, std::uint64_t seed)
{
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      x(i, k) = u(rng);
  return x;
}

struct GaussDesign
{
  MatrixXd x;
  VectorXd score;
};

// (f1, f2, x) with x = 0.6 f1 - 0.4 f2 + e, e ~ N(0, 0.5^2), kept inside [-3, 3]^3
GaussDesign truncated_gaussian(Index n, std::uint64_t seed)
{
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  GaussDesign g{ MatrixXd(n, 3), VectorXd(n) };
  Index i = 0;
  while (i < n) {
    const double f1 = nd(rng), f2 = nd(rng);
    const double mean = 0.6 * f1 - 0.4 * f2;
    const double x = mean + 0.5 * nd(rng);
    if (std::abs(f1) > 3 || std::abs(f2) > 3 || std::abs(x) > 3)
      continue;
    g.x.row(i) << f1, f2, x;
    g.score(i) = (x - mean) / 0.25;
    ++i;
  }
  return g;
}

} // namespace

TEST_CASE("rnull_loss of zero and constant networks")
{
  const MatrixXd x = uniform_inputs(300, 2, 1);
  const SmoothingSpec spec{ 0.3, 50, 1.0 };
  CHECK(rnull_loss(constant_net(2, 0.0), x, 1, spec) == 0.0);
  CHECK(rnull_loss(constant_net(2, 1.7), x, 1, spec) == doctest::Approx(1.7 * 1.7).epsilon(1e-12));
}

TEST_CASE("rnull_loss of the identity score on uniform data")
{
  // E[x^2] - 2 P(interior) = 1/3 - 2 * 0.8 for b = 1, h = 0.2
  const MatrixXd x = uniform_inputs(10000, 1, 2);
  const double loss = rnull_loss(identity_net(1), x, 0, { 0.2, 50, 1.0 });
  CHECK(loss == doctest::Approx(1.0 / 3.0 - 1.6).epsilon(0.05 / 1.2667));
}

TEST_CASE("rnull_loss: factored sum equals per-sample smoothing")
{
  Rng rng(3);
  const MatrixXd x = uniform_inputs(400, 3, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const NetworkModel a = initialize_network({ 3, 2, 8, 1e6 }, InputScaling::fit(x), rng);
    const SmoothingSpec spec{ 0.15 + 0.1 * trial, 50, 1.0 };
    const VectorXd vals = forward_rows(a, x);
    double deriv = 0.0;
    const PointFunction f = [&](const VectorXd& p) { return forward(a, p); };
    for (Index i = 0; i < x.rows(); ++i) {
      if (spec.interior(x(i, 2)))
        deriv += smoothed_partial(f, x.row(i).transpose(), 2, spec);
    }
    const double direct = (vals.squaredNorm() - 2.0 * deriv) / static_cast<double>(x.rows());
    CHECK(std::abs(rnull_loss(a, x, 2, spec) - direct) < 1e-10);
  }
}

TEST_CASE("train_score: reproducible, response-free, finite on degenerate input")
{
  const MatrixXd x = uniform_inputs(300, 2, 5);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 64;
  cfg.rng_seed = 9;
  const SmoothingSpec spec{ 0.3, 50, 1.0 };
  const ScoreFit a = train_score(x, 1, { 2, 2, 16, 50.0 }, cfg, spec);
  const ScoreFit b = train_score(x, 1, { 2, 2, 16, 50.0 }, cfg, spec);
  for (std::size_t l = 0; l < a.model.weights.size(); ++l)
    CHECK(a.model.weights[l] == b.model.weights[l]);
  CHECK(a.loss_trace() == b.loss_trace());
  for (double v : a.loss_trace())
    CHECK(std::isfinite(v));
  CHECK(a.model.architecture.input_dim == 2);

  MatrixXd flat = x;
  flat.col(1).setZero();
  const ScoreFit c = train_score(flat, 1, { 2, 2, 8, 50.0 }, cfg, { 1.0, 50, 1.0 });
  for (double v : c.loss_trace())
    CHECK(std::isfinite(v));
}

TEST_CASE("fitted score tracks the Gaussian score and has negative loss")
{
  const GaussDesign g = truncated_gaussian(2000, 11);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 64;
  cfg.rng_seed = 21;
  const SmoothingSpec spec{ 0.3, 50, 3.0 };
  const ScoreFit fit = train_score(g.x, 2, { 3, 2, 16, 100.0 }, cfg, spec);
  const VectorXd a = forward_rows(fit.model, g.x);
  const VectorXd u = a.array() - a.mean();
  const VectorXd v = g.score.array() - g.score.mean();
  const double rho = u.dot(v) / std::sqrt(u.squaredNorm() * v.squaredNorm());
  CHECK(std::abs(rho) > 0.7);
  CHECK(rnull_loss(fit.model, g.x, 2, spec) < 0.0);
}

TEST_CASE("train_score input checks")
{
  const MatrixXd x = uniform_inputs(50, 2, 6);
  CHECK_THROWS_AS(train_score(x, 1, { 3, 1, 4, 1.0 }, TrainConfig{}, { 0.3, 50, 1.0 }), shape_error);
  CHECK_THROWS_AS(train_score(x, 5, { 2, 1, 4, 1.0 }, TrainConfig{}, { 0.3, 50, 1.0 }), shape_error);
}
