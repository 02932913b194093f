#include "neural_screen/screening_pipeline.hpp"

#include "neural_screen/debias_center.hpp"
#include "neural_screen/errors.hpp"
#include "neural_screen/rng.hpp"
#include "neural_screen/score_estimation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace nscreen {

const char* to_string(ScreenMode m)
{
  return m == ScreenMode::low_dim ? "low" : "high";
}

void PipelineConfig::validate() const
{
  if (mode == ScreenMode::high_dim && rbar < 1)
    throw screen_error("high-dimensional mode needs rbar >= 1");
  if (reserved_rows && *reserved_rows < 1)
    throw screen_error("reserved row count must be positive");
  if (cv_grid.empty() && bandwidths.empty())
    throw screen_error("no bandwidth given");
  for (double h : bandwidths) {
    if (!(h > 0.0))
      throw screen_error("bandwidths must be positive");
  }
  for (double h : cv_grid) {
    if (!(h > 0.0))
      throw screen_error("CV candidates must be positive");
  }
  if (grid_size < 1)
    throw screen_error("Riemann grid size must be positive");
  if (regressor_truncation && !(*regressor_truncation > 0.0))
    throw screen_error("regressor truncation must be positive");
  if (score_truncation && !(*score_truncation > 0.0))
    throw screen_error("score truncation must be positive");
  tests.validate();
}

Index default_reserved_rows(Index n, Index rbar)
{
  const double per = std::ceil(5.0 * std::log(static_cast<double>(std::max<Index>(n, 2))));
  return std::min<Index>(100, static_cast<Index>(per) * rbar);
}

double default_score_truncation(const VectorXd& xj)
{
  const double mean = xj.mean();
  const double var = (xj.array() - mean).square().mean();
  if (!(var > 0.0))
    return 1.0;
  return 10.0 * (xj.array() - mean).abs().maxCoeff() / var;
}

namespace {

template<class F>
auto in_stage(const char* name, F&& body) -> decltype(body())
{
  try {
    return body();
  } catch (const stage_error&) {
    throw;
  } catch (const std::exception& e) {
    throw stage_error(name, e.what());
  }
}

Index reserved_for(const Dataset& data, const PipelineConfig& cfg)
{
  return cfg.reserved_rows ? *cfg.reserved_rows : default_reserved_rows(data.rows(), cfg.rbar);
}

// Reserved rows are [0, reserved); the estimation sample is the rest. The
// check is explicit so a future change of either index set cannot overlap.
void assert_disjoint(const std::vector<Index>& reserved, const std::vector<Index>& estimation)
{
  std::vector<Index> a = reserved;
  std::vector<Index> b = estimation;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<Index> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  if (!both.empty())
    throw screen_error("projector rows overlap the estimation sample");
}

} // namespace

std::optional<DiversifiedProjector> prepare_projector(const Dataset& data,
                                                      const PipelineConfig& cfg)
{
  if (cfg.mode == ScreenMode::low_dim)
    return std::nullopt;
  return in_stage("projector", [&] {
    data.validate();
    cfg.validate();
    const Index reserved = reserved_for(data, cfg);
    if (data.rows() < reserved + 50)
      throw insufficient_samples("need at least " + std::to_string(reserved + 50) +
                                 " rows, have " + std::to_string(data.rows()));
    return std::optional<DiversifiedProjector>(
      pretrain_projector(data.X.topRows(reserved), cfg.rbar));
  });
}

TestReport screen_coordinate(const Dataset& data, Index j, const PipelineConfig& cfg)
{
  return screen_coordinate(data, j, cfg, prepare_projector(data, cfg));
}

TestReport screen_coordinate(const Dataset& data,
                             Index j,
                             const PipelineConfig& cfg,
                             const std::optional<DiversifiedProjector>& projector)
{
  TestReport rep;
  rep.config = cfg;
  rep.coordinate = j;
  rep.mode = cfg.mode;

  // (1) conditioning inputs
  MatrixXd inputs;
  VectorXd y;
  in_stage("input", [&] {
    data.validate();
    cfg.validate();
    if (j < 0 || j >= data.cols())
      throw schema_error("coordinate " + std::to_string(j + 1) + " out of range (1.." +
                         std::to_string(data.cols()) + ")");
    rep.column_name = data.column_names[static_cast<std::size_t>(j)];
    rep.total_rows = data.rows();

    if (cfg.mode == ScreenMode::high_dim) {
      if (!projector)
        throw screen_error("high-dimensional mode needs a projector");
      if (projector->ambient_dim != data.cols())
        throw shape_error("projector dimension does not match the predictors");
      const Index reserved = projector->reserved_count;
      if (data.rows() < reserved + 50)
        throw insufficient_samples("need at least " + std::to_string(reserved + 50) +
                                   " rows, have " + std::to_string(data.rows()));
      std::vector<Index> res_idx(static_cast<std::size_t>(reserved));
      std::vector<Index> est_idx(static_cast<std::size_t>(data.rows() - reserved));
      for (Index i = 0; i < reserved; ++i)
        res_idx[static_cast<std::size_t>(i)] = i;
      for (Index i = reserved; i < data.rows(); ++i)
        est_idx[static_cast<std::size_t>(i - reserved)] = i;
      assert_disjoint(res_idx, est_idx);

      const Index m = data.rows() - reserved;
      const MatrixXd est = data.X.bottomRows(m);
      const MatrixXd f = diversify_rows(*projector, est);
      inputs.resize(m, f.cols() + 1);
      inputs.leftCols(f.cols()) = f;
      inputs.col(f.cols()) = est.col(j);
      y = data.y.tail(m);
      rep.reserved_rows = reserved;
      rep.rbar = projector->factor_bound;
      if (cfg.include_models)
        rep.projector = projector->W;
    } else {
      const Index n = data.rows();
      inputs.resize(n, data.cols());
      Index k = 0;
      for (Index c = 0; c < data.cols(); ++c) {
        if (c != j)
          inputs.col(k++) = data.X.col(c);
      }
      inputs.col(k) = data.X.col(j);
      y = data.y;
    }
    rep.estimation_rows = inputs.rows();
    rep.input_dim = inputs.cols();
    rep.half_width = inputs.col(inputs.cols() - 1).cwiseAbs().maxCoeff();
    if (!(rep.half_width > 0.0))
      throw degenerate_input("screened column is identically zero");
  });

  const Index coord = inputs.cols() - 1;
  const std::size_t n = static_cast<std::size_t>(inputs.rows());
  const auto uj = static_cast<std::uint64_t>(j);
  rep.seeds = { derive_seed(cfg.seed, "regressor", uj),
                derive_seed(cfg.seed, "score", uj),
                derive_seed(cfg.seed, "cv", uj) };
  const InputScaling scaling = InputScaling::fit(inputs);

  // (2) regression fit
  const double ymax = y.cwiseAbs().maxCoeff();
  rep.regressor_truncation = cfg.regressor_truncation ? *cfg.regressor_truncation
                                                      : 10.0 * std::max(ymax, 1e-3);
  const NetworkArchitecture reg_arch{ static_cast<int>(inputs.cols()),
                                      cfg.regressor_layers,
                                      cfg.regressor_width,
                                      rep.regressor_truncation };
  TrainConfig reg_cfg = cfg.regressor_train;
  reg_cfg.rng_seed = rep.seeds.regressor;
  const TrainedNetwork ghat = in_stage(
    "regressor", [&] { return train_regressor(inputs, y, reg_arch, reg_cfg, scaling); });
  rep.regressor_validation_loss = ghat.trace.best_validation_loss;
  rep.regressor_epochs = ghat.trace.epochs_run;
  if (cfg.include_models)
    rep.regressor_model = ghat.model;

  // (3) bandwidth
  std::vector<double> hs = cfg.bandwidths;
  if (!cfg.cv_grid.empty()) {
    in_stage("cv", [&] {
      CvSettings cv{ cfg.cv_grid, cfg.cv_folds, cfg.grid_size, rep.half_width };
      TrainConfig cv_cfg = cfg.regressor_train;
      cv_cfg.rng_seed = rep.seeds.cv;
      rep.cv = cv_bandwidth(inputs, y, coord, cv, reg_arch, cv_cfg);
      if (!std::isfinite(rep.cv->best_score))
        throw boundary_violation("no CV candidate leaves interior samples");
      hs = { rep.cv->best_bandwidth };
    });
  }

  const VectorXd g_vals = forward_rows(ghat.model, inputs);
  const VectorXd resid = y - g_vals;
  rep.score_truncation = cfg.score_truncation ? *cfg.score_truncation
                                              : default_score_truncation(inputs.col(coord));
  const NetworkArchitecture score_arch{ static_cast<int>(inputs.cols()),
                                        cfg.score_layers,
                                        cfg.score_width,
                                        rep.score_truncation };
  TrainConfig score_cfg = cfg.score_train;
  score_cfg.rng_seed = rep.seeds.score;

  for (double h : hs) {
    BandwidthReport br;
    br.bandwidth = h;
    const SmoothingSpec spec{ h, cfg.grid_size, rep.half_width };
    in_stage("smoothing", [&] { spec.validate(); });

    // (4) score
    const ScoreFit score = in_stage(
      "score", [&] { return train_score(inputs, coord, score_arch, score_cfg, spec, scaling); });
    br.score_final_loss = score.trace.train_loss.empty() ? 0.0 : score.trace.train_loss.back();
    br.score_validation_loss = score.trace.best_validation_loss;
    br.score_epochs = score.trace.epochs_run;
    const VectorXd a_vals = forward_rows(score.model, inputs);

    // (5) centering
    const DeltaEstimate d = in_stage("centering", [&] { return delta_hat(resid, a_vals); });
    br.delta = d.delta;
    br.delta_degenerate = d.degenerate;
    const VectorXd resid_c = resid - d.delta * a_vals;
    br.orthogonality = resid_c.dot(a_vals);

    // (6) smoothed derivatives at interior samples, by linearity
    const std::vector<Index> in = interior_indices(inputs.col(coord), spec);
    br.interior_count = static_cast<Index>(in.size());
    VectorXd g_s = VectorXd::Zero(0);
    VectorXd a_s = VectorXd::Zero(0);
    if (!in.empty()) {
      in_stage("smoothing", [&] {
        const MatrixXd pts = select_rows(inputs, in);
        g_s = smoothed_partials(ghat.model, pts, coord, spec);
        a_s = smoothed_partials(score.model, pts, coord, spec);
      });
    }
    const VectorXd c_s = g_s + d.delta * a_s;

    // (7) tests
    in_stage("tests", [&] {
      br.centered.tests = run_tests(c_s, n, resid_c, a_vals, cfg.tests);
      br.non_centered.tests = run_tests(g_s, n, resid, a_vals, cfg.tests);
    });
    if (cfg.include_models)
      br.score_model = score.model;
    rep.results.push_back(std::move(br));
  }
  return rep;
}

std::vector<TestReport> screen_all(const Dataset& data,
                                   const std::vector<Index>& coords,
                                   const PipelineConfig& cfg)
{
  if (coords.empty())
    return {};
  const std::optional<DiversifiedProjector> proj = prepare_projector(data, cfg);
  std::vector<std::optional<TestReport>> slots(coords.size());
  std::vector<std::exception_ptr> errors(coords.size());
  std::atomic<std::size_t> next{ 0 };
  auto worker = [&] {
    for (std::size_t k = next++; k < coords.size(); k = next++) {
      try {
        slots[k] = screen_coordinate(data, coords[k], cfg, proj);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned t =
    std::min<unsigned>(resolve_threads(cfg.threads), static_cast<unsigned>(coords.size()));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned q = 0; q < t; ++q)
      pool.emplace_back(worker);
  }
  std::vector<TestReport> out;
  out.reserve(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (errors[k])
      std::rethrow_exception(errors[k]);
    out.push_back(std::move(*slots[k]));
  }
  return out;
}

} // namespace nscreen
