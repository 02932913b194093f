#include <doctest.h>

#include "neural_screen/cli.hpp"
#include "neural_screen/errors.hpp"
#include "neural_screen/kernel_smoothing.hpp"

#include <cmath>
#include <random>

using namespace nscreen;

namespace {

// (1/h) int_{-1}^{1} Kdot(a) f(x - a h) da by a plain 1e5-cell midpoint rule
double quadrature_oracle(const std::function<double(double)>& f, double x, double h)
{
  const int m = 100000;
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    const double a = -1.0 + (i + 0.5) * 2.0 / m;
    s += kernel_deriv(a) * f(x - a * h);
  }
  return s * (2.0 / m) / h;
}

double smooth1(const std::function<double(double)>& f, double x, double h, double b = 10.0)
{
  const PointFunction pf = [&](const VectorXd& p) { return f(p(1)); };
  VectorXd pt(2);
  pt << 0.123, x;
  return smoothed_partial(pf, pt, 1, { h, 50, b });
}

} // namespace

TEST_CASE("quartic kernel values")
{
  CHECK(kernel_eval(0.0) == 0.9375);
  CHECK(kernel_eval(1.0) == 0.0);
  CHECK(kernel_eval(-1.0) == 0.0);
  CHECK(kernel_eval(1.5) == 0.0);
  CHECK(kernel_deriv(0.0) == 0.0);
  CHECK(kernel_deriv(0.5) == doctest::Approx(-1.40625).epsilon(1e-15));
  double s = 0.0;
  for (int i = 0; i < 10000; ++i)
    s += kernel_eval(-1.0 + (i + 0.5) * 2e-4) * 2e-4;
  CHECK(std::abs(s - 1.0) < 1e-10);
}

TEST_CASE("nodes lie inside (-1, 1)")
{
  const SmoothingSpec spec{ 0.5, 50, 1.0 };
  const auto a = spec.midpoints();
  CHECK(a.size() == 100);
  CHECK(a.front() == doctest::Approx(-0.99));
  CHECK(a.back() == doctest::Approx(0.99));
  for (double v : a) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  CHECK(spec.nodes().size() == spec.weights().size());
}

TEST_CASE("smoothed partial of constants, identity and x^2")
{
  for (double h : { 0.1, 0.5, 1.0, 2.0 }) {
    CHECK(std::abs(smooth1([](double) { return 3.7; }, 0.3, h)) < 1e-12);
    CHECK(std::abs(smooth1([](double t) { return t; }, 0.3, h) - 1.0) < 1e-6);
  }
  CHECK(smooth1([](double t) { return t * t; }, 0.3, 0.2) == doctest::Approx(0.6).epsilon(1e-4));
}

TEST_CASE("quartics match the quadrature oracle")
{
  const std::vector<std::function<double(double)>> polys = {
    [](double t) { return t; },
    [](double t) { return t * t * t; },
    [](double t) { return std::pow(t, 4) - 2 * t * t * t + t; },
    [](double t) { return 0.5 * std::pow(t, 4) + 3 * t * t - 1; },
  };
  for (const auto& f : polys) {
    for (double x : { -1.7, -0.2, 0.3, 1.2 }) {
      for (double h : { 0.1, 0.5, 1.0, 2.0 }) {
        const double want = quadrature_oracle(f, x, h);
        const double got = smooth1(f, x, h);
        CHECK(std::abs(got - want) <= 1e-5 * std::max(std::abs(want), 1.0));
      }
    }
  }
  // closed form 4(x^3 + 3 x h^2/7) - 6(x^2 + h^2/7) + 1 at x = 0.3, h = 0.5
  CHECK(smooth1([](double t) { return std::pow(t, 4) - 2 * t * t * t + t; }, 0.3, 0.5) ==
        doctest::Approx(0.48228571428571).epsilon(1e-6));
}

TEST_CASE("linearity of smoothing")
{
  auto f = [](double t) { return std::sin(3 * t); };
  auto g = [](double t) { return std::exp(-t * t); };
  const double lhs = smooth1([&](double t) { return 2.0 * f(t) - 0.7 * g(t); }, 0.4, 0.3);
  const double rhs = 2.0 * smooth1(f, 0.4, 0.3) - 0.7 * smooth1(g, 0.4, 0.3);
  CHECK(std::abs(lhs - rhs) < 1e-13);
}

TEST_CASE("boundary violations and batch/point agreement")
{
  const SmoothingSpec spec{ 0.5, 50, 1.0 };
  const PointFunction pf = [](const VectorXd& p) { return p(0) * p(0); };
  CHECK_THROWS_AS(smoothed_partial(pf, VectorXd::Constant(1, 0.9), 0, spec), boundary_violation);
  CHECK_THROWS_AS(SmoothingSpec({ 2.0, 50, 1.0 }).validate(), screen_error);

  MatrixXd pts(3, 1);
  pts << -0.4, 0.0, 0.45;
  const BatchFunction bf = [](const MatrixXd& r) { VectorXd v = r.col(0).array().square(); return v; };
  const VectorXd batch = smoothed_partials(bf, pts, 0, spec);
  for (Index i = 0; i < 3; ++i)
    CHECK(batch(i) == doctest::Approx(smoothed_partial(pf, pts.row(i).transpose(), 0, spec)).epsilon(1e-14));
}

TEST_CASE("interior indices")
{
  VectorXd x(3);
  x << -0.9, 0.0, 0.9;
  CHECK(interior_indices(x, { 0.5, 50, 1.0 }) == std::vector<Index>{ 1 });
  SmoothingSpec zero{ 0.0, 50, 1.0 };
  CHECK(interior_indices(x, zero).size() == 3);

  Rng rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd big(10000);
  for (Index i = 0; i < big.size(); ++i)
    big(i) = u(rng);
  const double frac = static_cast<double>(interior_indices(big, { 0.1, 50, 1.0 }).size()) / 1e4;
  CHECK(frac >= 0.88);
  CHECK(frac <= 0.92);
}

TEST_CASE("second moment of the smoothed derivative is bounded by (c/h)^2")
{
  // c = sqrt(2) * ||Kdot||_2 with ||Kdot||_2^2 = 15/7
  const double c = std::sqrt(2.0) * std::sqrt(15.0 / 7.0);
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Index n = 10000;
  VectorXd x(n);
  for (Index i = 0; i < n; ++i)
    x(i) = u(rng);
  const std::vector<std::function<double(double)>> fs = {
    [](double t) { return std::sin(9 * t); },
    [](double t) { return t > 0.1 ? 1.0 : -1.0; },
    [](double t) { return std::abs(t) < 0.05 ? 1.0 : 0.0; },
    [](double t) { return t * t * t; },
  };
  for (double h : { 0.1, 0.3 }) {
    const SmoothingSpec spec{ h, 50, 1.0 };
    for (const auto& f : fs) {
      double norm = 0.0;
      for (Index i = 0; i < n; ++i)
        norm += f(x(i)) * f(x(i));
      norm = std::sqrt(norm / n);
      const BatchFunction bf = [&](const MatrixXd& r) {
        VectorXd v(r.rows());
        for (Index i = 0; i < r.rows(); ++i)
          v(i) = f(r(i, 0)) / norm;
        return v;
      };
      const auto in = interior_indices(x, spec);
      MatrixXd pts(static_cast<Index>(in.size()), 1);
      for (std::size_t k = 0; k < in.size(); ++k)
        pts(static_cast<Index>(k), 0) = x(in[k]);
      const VectorXd s = smoothed_partials(bf, pts, 0, spec);
      const double second = s.squaredNorm() / static_cast<double>(n);
      CHECK(second <= 1.05 * (c / h) * (c / h));
    }
  }
}

TEST_CASE("smoothing tames the sawtooth")
{
  const SawtoothNorms r = sawtooth_norms(8, 0.2);
  CHECK(r.deriv_norm == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.smoothed_norm < 0.1);
}

TEST_CASE("select_bandwidth: minimum with ties toward larger h")
{
  CvResult t;
  t.bandwidths = { 0.5, 1.0, 1.5 };
  t.scores = { 2.0, 1.0, 1.0 };
  select_bandwidth(t);
  CHECK(t.best_bandwidth == 1.5);
  t.scores = { 0.3, 1.0, 1.0 };
  select_bandwidth(t);
  CHECK(t.best_bandwidth == 0.5);
}

namespace {

struct CvData
{
  MatrixXd x;
  VectorXd y;
};

CvData linear_data(Index n, std::uint64_t seed)
{
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  CvData d{ MatrixXd(n, 2), VectorXd(n) };
  for (Index i = 0; i < n; ++i) {
    d.x(i, 0) = nd(rng);
    d.x(i, 1) = nd(rng);
    d.y(i) = d.x(i, 0) + 0.5 * d.x(i, 1) + 0.3 * nd(rng);
  }
  return d;
}

TrainConfig quick()
{
  TrainConfig c;
  c.epochs = 40;
  c.batch_size = 64;
  c.rng_seed = 4;
  return c;
}

} // namespace

TEST_CASE("cv_bandwidth: single candidate, masked candidate, grid minimality")
{
  const CvData d = linear_data(300, 17);
  const NetworkArchitecture arch{ 2, 2, 8, 100.0 };

  CvSettings one{ { 0.8 }, 3 };
  CHECK(cv_bandwidth(d.x, d.y, 1, one, arch, quick()).best_bandwidth == 0.8);

  CvSettings masked{ { 0.5, 1e3 }, 3 };
  const CvResult m = cv_bandwidth(d.x, d.y, 1, masked, arch, quick());
  CHECK(std::isinf(m.scores[1]));
  CHECK(m.best_bandwidth == 0.5);

  CvSettings grid{ { 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0 }, 5 };
  const CvResult g = cv_bandwidth(d.x, d.y, 1, grid, arch, quick());
  bool in_grid = false;
  for (std::size_t k = 0; k < g.bandwidths.size(); ++k) {
    in_grid = in_grid || g.bandwidths[k] == g.best_bandwidth;
    CHECK(g.best_score <= g.scores[k]);
  }
  CHECK(in_grid);
}

TEST_CASE("cv_bandwidth: folds too small")
{
  const CvData d = linear_data(30, 3);
  CvSettings s{ { 0.5 }, 5 };
  CHECK_THROWS_AS(cv_bandwidth(d.x, d.y, 1, s, { 2, 1, 4, 10.0 }, quick()), fold_size_error);
}
