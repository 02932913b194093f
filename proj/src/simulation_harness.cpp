#include "neural_screen/simulation_harness.hpp"

#include "neural_screen/errors.hpp"
#include "neural_screen/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace nscreen {

const char* to_string(DgpModel m)
{
  return m == DgpModel::linear ? "linear" : "nonlinear";
}

const char* to_string(Hypothesis h)
{
  return h == Hypothesis::alternative ? "alternative" : "null";
}

const char* to_string(TestKind k)
{
  switch (k) {
    case TestKind::fixed_t:
      return "fixed_t";
    case TestKind::sup:
      return "sup";
    case TestKind::square:
      break;
  }
  return "square";
}

void DGPSpec::validate() const
{
  if (n < 2)
    throw screen_error("DGP needs n >= 2");
  if (extra_rows < 0)
    throw screen_error("extra rows must be nonnegative");
  if (d < factor_count())
    throw screen_error("DGP needs d >= r");
  if (signal_coord < 0 || signal_coord >= d)
    throw screen_error("signal coordinate out of range");
  if (!(factor_var > 0.0) || !(noise_var > 0.0))
    throw screen_error("DGP variances must be positive");
}

double nonlinear_null_mean(const VectorXd& f, double u1)
{
  return std::sin(f(0) + u1) + std::log(8.0 + f(1)) * std::log(8.0 + f(2)) +
         std::exp(-0.5 * f(3) * f(3));
}

double linear_null_mean(const VectorXd& f)
{
  return f(0) - f(1) + f(2) + f(3) - f(4);
}

double alternative_increment(DgpModel model, double x3)
{
  return model == DgpModel::nonlinear ? 0.25 * x3 * x3 : x3 / 16.0;
}

DGPSample gen_dgp(const DGPSpec& spec)
{
  spec.validate();
  const Index rows = spec.total_rows();
  const Index d = spec.d;
  const Index r = spec.factor_count();
  Rng rng(spec.seed);
  const double fsd = spec.sd_reading ? spec.factor_var : std::sqrt(spec.factor_var);
  const double esd = spec.sd_reading ? spec.noise_var : std::sqrt(spec.noise_var);
  std::uniform_real_distribution<double> load(-std::sqrt(3.0), std::sqrt(3.0));
  std::normal_distribution<double> fac(0.0, fsd);
  std::normal_distribution<double> noise(0.0, esd);

  DGPSample s;
  s.B.resize(d, r);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < r; ++b)
      s.B(a, b) = load(rng);
  s.F.resize(rows, r);
  for (Index i = 0; i < rows; ++i)
    for (Index b = 0; b < r; ++b)
      s.F(i, b) = fac(rng);
  s.U.resize(rows, d);
  for (Index i = 0; i < rows; ++i)
    for (Index a = 0; a < d; ++a)
      s.U(i, a) = fac(rng);
  s.eps.resize(rows);
  for (Index i = 0; i < rows; ++i)
    s.eps(i) = noise(rng);

  s.data.X = s.F * s.B.transpose() + s.U;
  s.m0.resize(rows);
  s.data.y.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    const VectorXd f = s.F.row(i).transpose();
    if (spec.model == DgpModel::nonlinear) {
      const double u1 = s.data.X(i, 0) - s.B.row(0).dot(s.F.row(i));
      s.m0(i) = nonlinear_null_mean(f, u1);
    } else {
      s.m0(i) = linear_null_mean(f);
    }
    double m = s.m0(i);
    if (spec.hypothesis == Hypothesis::alternative)
      m += alternative_increment(spec.model, s.data.X(i, spec.signal_coord));
    s.data.y(i) = m + s.eps(i);
  }
  s.data.column_names.reserve(static_cast<std::size_t>(d));
  for (Index a = 0; a < d; ++a)
    s.data.column_names.push_back("X" + std::to_string(a + 1));
  s.data.source_path = "generated";
  return s;
}

PipelineConfig paper_pipeline_config(const DGPSpec& dgp)
{
  PipelineConfig cfg;
  cfg.mode = ScreenMode::high_dim;
  cfg.rbar = dgp.factor_count();
  cfg.reserved_rows = dgp.extra_rows;
  cfg.bandwidths = { 0.1, 1.0, 1.5, 2.0 };
  cfg.regressor_train = { 800, 256, 0.005, 20, 0.2, 0 };
  cfg.score_train = { 400, 64, 0.005, 20, 0.2, 0 };
  cfg.regressor_layers = 5;
  cfg.regressor_width = 16;
  cfg.score_layers = 2;
  cfg.score_width = 16;
  return cfg;
}

std::uint64_t replication_seed(std::uint64_t master, Index r)
{
  return derive_seed(master, "replication", static_cast<std::uint64_t>(r));
}

ReplicationOutcome run_replication(const DGPSpec& dgp, const PipelineConfig& cfg)
{
  const DGPSample s = gen_dgp(dgp);
  const TestReport rep = screen_coordinate(s.data, dgp.signal_coord, cfg);
  ReplicationOutcome out;
  for (const BandwidthReport& br : rep.results) {
    for (int v = 0; v < 2; ++v) {
      const TestOutcome& t = v == 0 ? br.centered.tests : br.non_centered.tests;
      out.decisions[v][0].push_back(t.fixed_t.decision);
      out.decisions[v][1].push_back(t.sup.decision);
      out.decisions[v][2].push_back(t.square.decision);
    }
  }
  return out;
}

McTable run_monte_carlo(const DGPSpec& dgp, const PipelineConfig& cfg, const McSettings& settings)
{
  if (settings.replications < 1)
    throw screen_error("need at least one replication");
  dgp.validate();
  const Index R = settings.replications;
  const ReplicationFn fn = settings.replicate ? settings.replicate : ReplicationFn(run_replication);

  std::vector<std::optional<ReplicationOutcome>> slots(static_cast<std::size_t>(R));
  std::vector<std::string> errors(static_cast<std::size_t>(R));
  std::atomic<Index> next{ 0 };
  std::atomic<Index> done{ 0 };
  std::mutex progress_mu;
  auto worker = [&] {
    for (Index r = next++; r < R; r = next++) {
      const std::uint64_t base = replication_seed(settings.seed, r);
      DGPSpec d = dgp;
      d.seed = derive_seed(base, "dgp");
      PipelineConfig c = cfg;
      c.seed = derive_seed(base, "pipeline");
      c.threads = 1;
      try {
        slots[static_cast<std::size_t>(r)] = fn(d, c);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = e.what();
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = "unknown failure";
      }
      const Index k = ++done;
      if (settings.progress) {
        std::lock_guard lock(progress_mu);
        settings.progress(k, R);
      }
    }
  };
  const unsigned t = std::min<unsigned>(resolve_threads(settings.threads), static_cast<unsigned>(R));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned q = 0; q < t; ++q)
      pool.emplace_back(worker);
  }

  McTable table;
  table.dgp = dgp;
  table.alpha = cfg.tests.alpha;
  table.bandwidths = cfg.cv_grid.empty() ? cfg.bandwidths : std::vector<double>{ 0.0 };
  const std::size_t nh = table.bandwidths.size();
  for (auto& v : table.cells)
    for (auto& row : v)
      row.assign(nh, McCell{});

  // reduce in replication order
  Index ok = 0;
  for (Index r = 0; r < R; ++r) {
    const auto& slot = slots[static_cast<std::size_t>(r)];
    if (!slot) {
      ++table.failures;
      table.failure_messages.push_back("replication " + std::to_string(r) + ": " +
                                       errors[static_cast<std::size_t>(r)]);
      continue;
    }
    bool shaped = true;
    for (const auto& v : slot->decisions)
      for (const auto& row : v)
        shaped = shaped && row.size() == nh;
    if (!shaped) {
      ++table.failures;
      table.failure_messages.push_back("replication " + std::to_string(r) +
                                       ": wrong number of decisions");
      continue;
    }
    ++ok;
    for (int v = 0; v < 2; ++v)
      for (int k = 0; k < 3; ++k)
        for (std::size_t h = 0; h < nh; ++h) {
          const Decision dec = slot->decisions[v][k][h];
          McCell& cell = table.cells[v][k][h];
          if (dec == Decision::reject)
            ++cell.rejections;
          else if (dec == Decision::no_decision)
            ++cell.no_decisions;
        }
  }
  table.replications = ok;
  for (auto& v : table.cells)
    for (auto& row : v)
      for (McCell& cell : row) {
        if (ok == 0)
          continue;
        const double p = static_cast<double>(cell.rejections) / static_cast<double>(ok);
        const double half = 2.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(ok));
        cell.rate = p;
        cell.ci_low = std::max(0.0, p - half);
        cell.ci_high = std::min(1.0, p + half);
      }
  return table;
}

namespace {

constexpr TestKind kTests[] = { TestKind::fixed_t, TestKind::sup, TestKind::square };

const char* test_label(TestKind k)
{
  switch (k) {
    case TestKind::fixed_t:
      return "Fixed-t";
    case TestKind::sup:
      return "Sup";
    case TestKind::square:
      break;
  }
  return "Square";
}

std::string fixed2(double v)
{
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

std::string number(double v)
{
  std::ostringstream s;
  s << v;
  return s.str();
}

} // namespace

std::string format_table_csv(const McTable& size, const McTable* power)
{
  if (power && power->bandwidths != size.bandwidths)
    throw shape_error("size and power tables use different bandwidths");
  std::string out = "test,variant";
  for (double h : size.bandwidths)
    out += ",h=" + number(h);
  out += '\n';
  for (TestKind k : kTests) {
    for (bool centered : { true, false }) {
      out += test_label(k);
      out += centered ? ",centered" : ",non-centered";
      for (std::size_t h = 0; h < size.bandwidths.size(); ++h) {
        out += ',' + fixed2(size.cell(centered, k, h).rate);
        if (power)
          out += " (" + fixed2(power->cell(centered, k, h).rate) + ")";
      }
      out += '\n';
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json table_json(const McTable& t)
{
  nlohmann::ordered_json j;
  j["hypothesis"] = to_string(t.dgp.hypothesis);
  j["replications"] = t.replications;
  j["failures"] = t.failures;
  j["failure_messages"] = t.failure_messages;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (TestKind k : kTests) {
    for (bool centered : { true, false }) {
      for (std::size_t h = 0; h < t.bandwidths.size(); ++h) {
        const McCell& c = t.cell(centered, k, h);
        nlohmann::ordered_json e;
        e["test"] = to_string(k);
        e["variant"] = centered ? "centered" : "non_centered";
        e["bandwidth"] = t.bandwidths[h];
        e["rate"] = c.rate;
        e["ci_low"] = c.ci_low;
        e["ci_high"] = c.ci_high;
        e["rejections"] = c.rejections;
        e["no_decisions"] = c.no_decisions;
        cells.push_back(std::move(e));
      }
    }
  }
  j["cells"] = std::move(cells);
  return j;
}

} // namespace

std::string format_table_json(const McTable& size, const McTable* power)
{
  nlohmann::ordered_json j;
  const DGPSpec& d = size.dgp;
  j["model"] = to_string(d.model);
  j["n"] = d.n;
  j["d"] = d.d;
  j["r"] = d.factor_count();
  j["extra_rows_for_projector"] = d.extra_rows;
  j["factor_param"] = d.factor_var;
  j["noise_param"] = d.noise_var;
  j["normal_parameter_reading"] = d.sd_reading ? "standard_deviation" : "variance";
  j["alpha"] = size.alpha;
  j["bandwidths"] = size.bandwidths;
  j["interval"] = "rate +- 2 sqrt(rate (1 - rate) / R)";
  j["size"] = table_json(size);
  if (power)
    j["power"] = table_json(*power);
  return j.dump(2) + "\n";
}

} // namespace nscreen
