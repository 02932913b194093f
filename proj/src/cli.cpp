#include "neural_screen/cli.hpp"

#include "neural_screen/dataset.hpp"
#include "neural_screen/errors.hpp"
#include "neural_screen/kernel_smoothing.hpp"
#include "neural_screen/nn_core.hpp"
#include "neural_screen/report_io.hpp"
#include "neural_screen/rng.hpp"
#include "neural_screen/screening_pipeline.hpp"
#include "neural_screen/simulation_harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace nscreen {

namespace fs = std::filesystem;

SawtoothNorms sawtooth_norms(int depth, double bandwidth, int quad_points, int grid_size)
{
  if (quad_points < 1)
    throw screen_error("quadrature needs at least one point");
  const NetworkModel saw = build_sawtooth(depth);
  SawtoothNorms out;
  out.depth = depth;
  out.bandwidth = bandwidth;
  out.value_exact = 2.0 / std::sqrt(3.0) * std::ldexp(1.0, -depth);

  const double step = 1.0 / quad_points;
  MatrixXd pts(quad_points, 1);
  for (int i = 0; i < quad_points; ++i)
    pts(i, 0) = (i + 0.5) * step;
  out.value_norm = std::sqrt(forward_rows(saw, pts).squaredNorm() * step);
  out.deriv_norm = std::sqrt(input_partials(saw, pts, 0).squaredNorm() * step);

  if (bandwidth > 0.0) {
    // centred copy on [-1/2, 1/2] so the smoothing support is symmetric
    const SmoothingSpec spec{ bandwidth, grid_size, 0.5 };
    const BatchFunction f = [&saw](const MatrixXd& rows) {
      return forward_rows(saw, (rows.array() + 0.5).matrix());
    };
    const double lo = spec.interior_lo();
    const double width = spec.interior_hi() - lo;
    const int m = 4096;
    MatrixXd in(m, 1);
    for (int i = 0; i < m; ++i)
      in(i, 0) = lo + (i + 0.5) * width / m;
    const VectorXd s = smoothed_partials(f, in, 0, spec);
    out.smoothed_norm = std::sqrt(s.squaredNorm() * width / m);
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos)
      continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw CLI::ValidationError("list", "cannot parse '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw CLI::ValidationError("list", "cannot parse '" + item + "'");
    out.push_back(v);
  }
  return out;
}

namespace {

struct ScreenArgs
{
  std::string data;
  std::string target;
  std::string coords;
  long rbar = 4;
  std::string bandwidth;
  std::string grid;
  int folds = 5;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string mode = "high";
  std::string out = "screen_out";
  long reserved = 0;
  int epochs = 800;
  int score_epochs = 400;
  bool include_models = false;
};

struct SimulateArgs
{
  std::string config;
  std::string out = "simulate_out";
  long replications = 0;
};

struct CvArgs
{
  std::string data;
  std::string target;
  long coord = 1;
  long rbar = 4;
  std::string mode = "high";
  std::string grid = "0.1,1.0,1.5,2.0";
  int folds = 5;
  std::uint64_t seed = 0;
  int epochs = 800;
  std::string out;
};

struct SawArgs
{
  int depth = 5;
  double bandwidth = 0.2;
  int grid = 1000;
  std::string out;
};

void write_file(const fs::path& path, const std::string& text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw screen_error("cannot write '" + path.string() + "'");
  f << text;
}

ScreenMode parse_mode(const std::string& m)
{
  if (m == "high")
    return ScreenMode::high_dim;
  if (m == "low")
    return ScreenMode::low_dim;
  throw CLI::ValidationError("--mode", "expected high or low");
}

std::vector<Index> parse_coords(const std::string& text, Index d)
{
  std::vector<Index> out;
  for (double v : parse_number_list(text)) {
    if (v != std::floor(v) || v < 1 || v > static_cast<double>(d))
      throw schema_error("coordinate " + std::to_string(v) + " outside 1.." + std::to_string(d));
    out.push_back(static_cast<Index>(v) - 1);
  }
  return out;
}

int do_screen(const ScreenArgs& a, unsigned threads)
{
  const Dataset data = load_csv(a.data, a.target);
  PipelineConfig cfg;
  cfg.mode = parse_mode(a.mode);
  cfg.rbar = a.rbar;
  if (a.reserved > 0)
    cfg.reserved_rows = a.reserved;
  if (!a.bandwidth.empty())
    cfg.bandwidths = parse_number_list(a.bandwidth);
  if (!a.grid.empty())
    cfg.cv_grid = parse_number_list(a.grid);
  cfg.cv_folds = a.folds;
  cfg.tests.alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.regressor_train.epochs = a.epochs;
  cfg.score_train.epochs = a.score_epochs;
  cfg.include_models = a.include_models;
  cfg.threads = threads;

  const std::vector<Index> coords = parse_coords(a.coords, data.cols());
  const std::vector<TestReport> reports = screen_all(data, coords, cfg);

  fs::create_directories(a.out);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const TestReport& r = reports[k];
    const std::string name = "report_" + std::to_string(k + 1) + "_coord" +
                             std::to_string(r.coordinate + 1) + ".json";
    write_file(fs::path(a.out) / name, report_json_string(r));
    const TestOutcome& c = r.primary().centered.tests;
    std::cout << std::setw(12) << r.column_name << "  h=" << r.primary().bandwidth
              << "  fixed-t " << c.intervals.fixed_t << "  sup " << c.intervals.sup
              << "  square " << c.intervals.square << '\n';
  }
  write_file(fs::path(a.out) / "intervals.svg", intervals_svg(reports));
  return 0;
}

template<class T>
void take(const nlohmann::json& j, const char* key, T& dst)
{
  if (j.contains(key))
    dst = j.at(key).get<T>();
}

int do_simulate(const SimulateArgs& a, unsigned threads)
{
  std::ifstream in(a.config);
  if (!in)
    throw schema_error("cannot open config '" + a.config + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(std::string("config is not valid JSON: ") + e.what());
  }

  DGPSpec dgp;
  std::string model = "nonlinear";
  take(j, "model", model);
  if (model == "linear")
    dgp.model = DgpModel::linear;
  else if (model != "nonlinear")
    throw schema_error("model must be nonlinear or linear");
  take(j, "n", dgp.n);
  take(j, "d", dgp.d);
  take(j, "extra_rows", dgp.extra_rows);
  take(j, "factor_param", dgp.factor_var);
  take(j, "noise_param", dgp.noise_var);
  take(j, "sd_reading", dgp.sd_reading);
  long signal = 3;
  take(j, "signal_coordinate", signal);
  dgp.signal_coord = signal - 1;

  PipelineConfig cfg = paper_pipeline_config(dgp);
  take(j, "bandwidths", cfg.bandwidths);
  take(j, "alpha", cfg.tests.alpha);
  take(j, "regressor_epochs", cfg.regressor_train.epochs);
  take(j, "score_epochs", cfg.score_train.epochs);
  take(j, "patience", cfg.regressor_train.patience);
  cfg.score_train.patience = cfg.regressor_train.patience;
  take(j, "grid_size", cfg.grid_size);

  McSettings mc;
  take(j, "replications", mc.replications);
  if (a.replications > 0)
    mc.replications = a.replications;
  take(j, "seed", mc.seed);
  mc.threads = threads;
  mc.progress = [](Index done, Index total) {
    std::cerr << "\rreplication " << done << "/" << total << std::flush;
    if (done == total)
      std::cerr << '\n';
  };
  std::string hyp = "both";
  take(j, "hypothesis", hyp);
  if (hyp != "both" && hyp != "null" && hyp != "alternative")
    throw schema_error("hypothesis must be both, null or alternative");

  std::optional<McTable> size;
  std::optional<McTable> power;
  if (hyp != "alternative") {
    dgp.hypothesis = Hypothesis::null;
    size = run_monte_carlo(dgp, cfg, mc);
  }
  if (hyp != "null") {
    dgp.hypothesis = Hypothesis::alternative;
    power = run_monte_carlo(dgp, cfg, mc);
  }
  const McTable& first = size ? *size : *power;
  const McTable* second = size && power ? &*power : nullptr;

  fs::create_directories(a.out);
  const std::string csv = format_table_csv(first, second);
  write_file(fs::path(a.out) / "table.csv", csv);
  write_file(fs::path(a.out) / "table.json", format_table_json(first, second));
  std::cout << csv;
  return 0;
}

int do_cv(const CvArgs& a, unsigned /*threads*/)
{
  const Dataset data = load_csv(a.data, a.target);
  PipelineConfig cfg;
  cfg.mode = parse_mode(a.mode);
  cfg.rbar = a.rbar;
  cfg.cv_grid = parse_number_list(a.grid);
  cfg.cv_folds = a.folds;
  cfg.seed = a.seed;
  cfg.regressor_train.epochs = a.epochs;
  const std::vector<Index> coords = parse_coords(std::to_string(a.coord), data.cols());

  // the CV stage runs inside the pipeline; reuse its input construction
  const std::optional<DiversifiedProjector> proj = prepare_projector(data, cfg);
  MatrixXd inputs;
  VectorXd y;
  const Index j = coords.front();
  if (proj) {
    const Index m = data.rows() - proj->reserved_count;
    const MatrixXd est = data.X.bottomRows(m);
    const MatrixXd f = diversify_rows(*proj, est);
    inputs.resize(m, f.cols() + 1);
    inputs << f, est.col(j);
    y = data.y.tail(m);
  } else {
    inputs.resize(data.rows(), data.cols());
    Index k = 0;
    for (Index c = 0; c < data.cols(); ++c) {
      if (c != j)
        inputs.col(k++) = data.X.col(c);
    }
    inputs.col(k) = data.X.col(j);
    y = data.y;
  }
  const Index coord = inputs.cols() - 1;
  const NetworkArchitecture arch{ static_cast<int>(inputs.cols()),
                                  cfg.regressor_layers,
                                  cfg.regressor_width,
                                  10.0 * std::max(y.cwiseAbs().maxCoeff(), 1e-3) };
  TrainConfig tc = cfg.regressor_train;
  tc.rng_seed = derive_seed(cfg.seed, "cv", static_cast<std::uint64_t>(j));
  CvSettings cs{ cfg.cv_grid, cfg.cv_folds, cfg.grid_size, 0.0 };
  CvResult res;
  try {
    res = cv_bandwidth(inputs, y, coord, cs, arch, tc);
  } catch (const stage_error&) {
    throw;
  } catch (const std::exception& e) {
    throw stage_error("cv", e.what());
  }

  std::ostringstream s;
  s << std::setprecision(17) << "bandwidth,cv_score,selected\n";
  for (std::size_t k = 0; k < res.bandwidths.size(); ++k)
    s << res.bandwidths[k] << ',' << res.scores[k] << ','
      << (res.bandwidths[k] == res.best_bandwidth ? 1 : 0) << '\n';
  if (a.out.empty())
    std::cout << s.str();
  else
    write_file(a.out, s.str());
  return 0;
}

int do_sawtooth(const SawArgs& a)
{
  const SawtoothNorms r = sawtooth_norms(a.depth, a.bandwidth, 1 << 18, a.grid);
  std::ostringstream s;
  s << "depth,value_norm,value_norm_exact,derivative_norm,smoothed_derivative_norm,bandwidth\n";
  s << std::fixed << r.depth << ',' << std::setprecision(6) << r.value_norm << ','
    << r.value_exact << ',' << std::setprecision(3) << r.deriv_norm << ','
    << std::setprecision(6) << r.smoothed_norm << ',' << std::setprecision(3) << r.bandwidth
    << '\n';
  if (a.out.empty())
    std::cout << s.str();
  else
    write_file(a.out, s.str());
  return 0;
}

} // namespace

int run_command(int argc, char** argv)
{
  CLI::App app{ "neural-screen: conditional variable screening with neural factor regression",
                "neural-screen" };
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap (NEURAL_SCREEN_THREADS overrides)");

  ScreenArgs sa;
  auto* screen = app.add_subcommand("screen", "screen predictors of a CSV dataset");
  screen->add_option("--data", sa.data, "CSV file with a header row")->required();
  screen->add_option("--target", sa.target, "response column name")->required();
  screen->add_option("--coords", sa.coords, "1-based predictor indices, e.g. 1,3,7")->required();
  screen->add_option("--rbar", sa.rbar, "number of diversified factors");
  auto* bw = screen->add_option("--bandwidth", sa.bandwidth, "bandwidth(s), comma separated");
  auto* grid = screen->add_option("--bandwidth-grid", sa.grid, "CV candidates, comma separated");
  bw->excludes(grid);
  screen->add_option("--folds", sa.folds, "CV folds");
  screen->add_option("--alpha", sa.alpha, "significance level");
  screen->add_option("--seed", sa.seed, "master seed");
  screen->add_option("--mode", sa.mode, "high or low")->check(CLI::IsMember({ "high", "low" }));
  screen->add_option("--out", sa.out, "output directory");
  screen->add_option("--reserved-rows", sa.reserved, "rows reserved for the projector");
  screen->add_option("--epochs", sa.epochs, "regressor epochs");
  screen->add_option("--score-epochs", sa.score_epochs, "score network epochs");
  screen->add_flag("--include-models", sa.include_models, "embed weights in the reports");
  screen->add_option("--threads", threads, "worker cap");

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo size/power table");
  sim->add_option("--config", ma.config, "JSON table configuration")->required();
  sim->add_option("--out", ma.out, "output directory");
  sim->add_option("--replications", ma.replications, "override the replication count");
  sim->add_option("--threads", threads, "worker cap");

  CvArgs ca;
  auto* cv = app.add_subcommand("cv-bandwidth", "cross-validated bandwidth table");
  cv->add_option("--data", ca.data, "CSV file with a header row")->required();
  cv->add_option("--target", ca.target, "response column name")->required();
  cv->add_option("--coord", ca.coord, "1-based predictor index")->required();
  cv->add_option("--rbar", ca.rbar, "number of diversified factors");
  cv->add_option("--mode", ca.mode, "high or low")->check(CLI::IsMember({ "high", "low" }));
  cv->add_option("--grid", ca.grid, "bandwidth candidates, comma separated");
  cv->add_option("--folds", ca.folds, "folds");
  cv->add_option("--seed", ca.seed, "master seed");
  cv->add_option("--epochs", ca.epochs, "regressor epochs");
  cv->add_option("--out", ca.out, "CSV output (stdout when absent)");

  SawArgs wa;
  auto* saw = app.add_subcommand("demo-sawtooth", "sawtooth norm table");
  saw->add_option("--depth", wa.depth, "network depth L")->required()->check(CLI::Range(1, 30));
  saw->add_option("--bandwidth", wa.bandwidth, "smoothing bandwidth on [0, 1]");
  saw->add_option("--grid", wa.grid, "Riemann nodes per side");
  saw->add_option("--out", wa.out, "CSV output (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*screen)
      return do_screen(sa, threads);
    if (*sim)
      return do_simulate(ma, threads);
    if (*cv)
      return do_cv(ca, threads);
    return do_sawtooth(wa);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const stage_error& e) {
    std::cerr << "error in stage '" << e.stage() << "': " << e.what() << '\n';
    return 1;
  } catch (const parse_error& e) {
    std::cerr << "error in stage 'input': " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error in stage 'input': " << e.what() << '\n';
    return 1;
  }
}

} // namespace nscreen
