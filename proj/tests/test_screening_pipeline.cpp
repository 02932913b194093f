#include <doctest.h>

#include "neural_screen/errors.hpp"
#include "neural_screen/report_io.hpp"
#include "neural_screen/screening_pipeline.hpp"
#include "neural_screen/simulation_harness.hpp"

#include <cmath>
#include <random>

using namespace nscreen;

namespace {

PipelineConfig quick_config(ScreenMode mode, Index rbar)
{
  PipelineConfig cfg;
  cfg.mode = mode;
  cfg.rbar = rbar;
  cfg.bandwidths = { 0.5, 1.0 };
  cfg.regressor_layers = 2;
  cfg.regressor_width = 8;
  cfg.regressor_train.epochs = 40;
  cfg.score_train.epochs = 40;
  cfg.seed = 99;
  return cfg;
}

Dataset small_dgp(std::uint64_t seed, Index n = 200, Index d = 30)
{
  DGPSpec spec;
  spec.n = n;
  spec.d = d;
  spec.seed = seed;
  return gen_dgp(spec).data;
}

// two factors, 48 predictors, Y depends on X3 beyond the factors
Dataset ranking_data(std::uint64_t seed)
{
  const Index reserved = 100, n = 400, d = 48, total = reserved + n;
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
  MatrixXd B(d, 2);
  for (Index k = 0; k < d; ++k)
    B.row(k) << u(rng), u(rng);
  Dataset data;
  data.X.resize(total, d);
  data.y.resize(total);
  for (Index i = 0; i < total; ++i) {
    const double f1 = nd(rng), f2 = nd(rng);
    for (Index k = 0; k < d; ++k)
      data.X(i, k) = B(k, 0) * f1 + B(k, 1) * f2 + 0.7 * nd(rng);
    data.y(i) = f1 + 0.5 * f2 * f2 + data.X(i, 2) + 0.5 * nd(rng);
  }
  for (Index k = 0; k < d; ++k)
    data.column_names.push_back("X" + std::to_string(k + 1));
  return data;
}

} // namespace

TEST_CASE("same seed gives the same report")
{
  const Dataset data = small_dgp(1);
  const PipelineConfig cfg = quick_config(ScreenMode::high_dim, 4);
  const TestReport a = screen_coordinate(data, 2, cfg);
  const TestReport b = screen_coordinate(data, 2, cfg);
  CHECK(report_json_string(a) == report_json_string(b));
  CHECK(a.reserved_rows == 100);
  CHECK(a.estimation_rows == 200);
  CHECK(a.input_dim == 5);
  CHECK(a.results.size() == 2);
  CHECK(a.column_name == "X3");
  CHECK_FALSE(a.projector.has_value());
  for (const BandwidthReport& r : a.results) {
    CHECK(r.interior_count > 0);
    CHECK(r.interior_count <= a.estimation_rows);
    CHECK(std::isfinite(r.centered.tests.fixed_t.z_value));
  }

  PipelineConfig other = cfg;
  other.seed = 100;
  CHECK(report_json_string(screen_coordinate(data, 2, other)) != report_json_string(a));
}

TEST_CASE("seeds depend on coordinate and master seed only")
{
  const Dataset data = small_dgp(2);
  PipelineConfig cfg = quick_config(ScreenMode::high_dim, 4);
  cfg.bandwidths = { 1.0 };
  const TestReport a = screen_coordinate(data, 0, cfg);
  const TestReport b = screen_coordinate(data, 1, cfg);
  CHECK(a.seeds.regressor != b.seeds.regressor);
  CHECK(a.seeds.score != b.seeds.score);
  CHECK(a.seeds.regressor != a.seeds.score);
}

TEST_CASE("low-dimensional mode conditions on the other columns")
{
  Rng rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset data;
  data.X.resize(300, 4);
  data.y.resize(300);
  for (Index i = 0; i < 300; ++i) {
    for (Index k = 0; k < 4; ++k)
      data.X(i, k) = nd(rng);
    data.y(i) = data.X(i, 0) - data.X(i, 3) + 0.3 * nd(rng);
  }
  data.column_names = { "a", "b", "c", "d" };
  PipelineConfig cfg = quick_config(ScreenMode::low_dim, 0);
  cfg.include_models = true;
  const TestReport rep = screen_coordinate(data, 1, cfg);
  CHECK(rep.input_dim == 4);
  CHECK(rep.reserved_rows == 0);
  CHECK(rep.estimation_rows == 300);
  CHECK_FALSE(rep.projector.has_value());
  const ordered_json j = report_to_json(rep);
  CHECK(j["mode"] == "low");
  CHECK(j.contains("regressor_model"));
  CHECK_FALSE(j.contains("projector"));
  CHECK(rep.half_width == doctest::Approx(data.X.col(1).cwiseAbs().maxCoeff()));
}

TEST_CASE("stage errors")
{
  const Dataset data = small_dgp(4, 40, 20);
  const PipelineConfig cfg = quick_config(ScreenMode::high_dim, 4);
  try {
    screen_coordinate(data, 0, cfg);
    FAIL("expected a stage error");
  } catch (const stage_error& e) {
    CHECK(e.stage() == "projector");
  }

  const Dataset ok = small_dgp(5);
  try {
    screen_coordinate(ok, 30, cfg);
    FAIL("expected a stage error");
  } catch (const stage_error& e) {
    CHECK(e.stage() == "input");
  }

  Dataset flat = ok;
  flat.X.col(3).setZero();
  CHECK_THROWS_AS(screen_coordinate(flat, 3, cfg), stage_error);

  PipelineConfig bad = cfg;
  bad.bandwidths.clear();
  CHECK_THROWS_AS(screen_coordinate(ok, 0, bad), screen_error);
}

TEST_CASE("screen_all: empty, duplicates, order")
{
  const Dataset data = small_dgp(6);
  PipelineConfig cfg = quick_config(ScreenMode::high_dim, 4);
  cfg.bandwidths = { 1.0 };
  CHECK(screen_all(data, {}, cfg).empty());
  const std::vector<TestReport> reps = screen_all(data, { 4, 1, 4 }, cfg);
  REQUIRE(reps.size() == 3);
  CHECK(reps[0].coordinate == 4);
  CHECK(reps[1].coordinate == 1);
  CHECK(report_json_string(reps[0]) == report_json_string(reps[2]));
  CHECK(report_json_string(reps[1]) == report_json_string(screen_coordinate(data, 1, cfg)));

  cfg.threads = 3;
  const std::vector<TestReport> par = screen_all(data, { 4, 1, 4 }, cfg);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(report_json_string(par[k]) == report_json_string(reps[k]));
}

TEST_CASE("signal coordinate ranks first among 48" * doctest::timeout(1800))
{
  PipelineConfig cfg = quick_config(ScreenMode::high_dim, 2);
  cfg.bandwidths = { 1.0 };
  cfg.regressor_layers = 3;
  cfg.regressor_width = 16;
  cfg.regressor_train.epochs = 150;
  cfg.score_train.epochs = 100;
  std::vector<Index> all(48);
  for (Index k = 0; k < 48; ++k)
    all[static_cast<std::size_t>(k)] = k;
  int top = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    const Dataset data = ranking_data(1000 + s);
    cfg.seed = 500 + s;
    const std::vector<TestReport> reps = screen_all(data, all, cfg);
    Index best = 0;
    for (Index k = 1; k < 48; ++k) {
      if (reps[k].primary().centered.tests.intervals.square >
          reps[best].primary().centered.tests.intervals.square)
        best = k;
    }
    MESSAGE("seed " << s << ": top coordinate " << best + 1 << ", ratio "
                    << reps[2].primary().centered.tests.intervals.square);
    top += best == 2;
  }
  CHECK(top >= 9);
}
