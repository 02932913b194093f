#include "neural_screen/report_io.hpp"

#include "neural_screen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nscreen {

namespace {

ordered_json matrix_json(const MatrixXd& m)
{
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < m.cols(); ++c)
      row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_json(const VectorXd& v)
{
  ordered_json out = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i)
    out.push_back(v(i));
  return out;
}

MatrixXd matrix_from(const ordered_json& j)
{
  const Index r = static_cast<Index>(j.size());
  const Index c = r > 0 ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(j[i].size()) != c)
      throw schema_error("ragged matrix in model JSON");
    for (Index k = 0; k < c; ++k)
      m(i, k) = j[i][k].get<double>();
  }
  return m;
}

VectorXd vector_from(const ordered_json& j)
{
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v(i) = j[i].get<double>();
  return v;
}

ordered_json train_json(const TrainConfig& c)
{
  ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["patience"] = c.patience;
  j["validation_fraction"] = c.validation_fraction;
  return j;
}

} // namespace

ordered_json model_to_json(const NetworkModel& model)
{
  ordered_json j;
  const NetworkArchitecture& a = model.architecture;
  j["architecture"] = { { "input_dim", a.input_dim },
                        { "hidden_layers", a.hidden_layers },
                        { "hidden_width", a.hidden_width },
                        { "truncation_level", a.truncation_level } };
  ordered_json w = ordered_json::array();
  ordered_json b = ordered_json::array();
  for (int l = 0; l < model.layer_count(); ++l) {
    w.push_back(matrix_json(model.weights[static_cast<std::size_t>(l)]));
    b.push_back(vector_json(model.biases[static_cast<std::size_t>(l)]));
  }
  j["weights"] = std::move(w);
  j["biases"] = std::move(b);
  j["input_shift"] = vector_json(model.scaling.shift);
  j["input_scale"] = vector_json(model.scaling.scale);
  return j;
}

NetworkModel model_from_json(const ordered_json& j)
{
  NetworkModel m;
  const auto& a = j.at("architecture");
  m.architecture.input_dim = a.at("input_dim").get<int>();
  m.architecture.hidden_layers = a.at("hidden_layers").get<int>();
  m.architecture.hidden_width = a.at("hidden_width").get<int>();
  m.architecture.truncation_level = a.at("truncation_level").get<double>();
  for (const auto& w : j.at("weights"))
    m.weights.push_back(matrix_from(w));
  for (const auto& b : j.at("biases"))
    m.biases.push_back(vector_from(b));
  m.scaling.shift = vector_from(j.at("input_shift"));
  m.scaling.scale = vector_from(j.at("input_scale"));
  m.audit_shapes();
  return m;
}

ordered_json config_to_json(const PipelineConfig& cfg)
{
  ordered_json j;
  j["mode"] = to_string(cfg.mode);
  j["rbar"] = cfg.rbar;
  if (cfg.reserved_rows)
    j["reserved_rows"] = *cfg.reserved_rows;
  else
    j["reserved_rows"] = nullptr;
  j["bandwidths"] = cfg.bandwidths;
  j["cv_grid"] = cfg.cv_grid;
  j["cv_folds"] = cfg.cv_folds;
  j["grid_size"] = cfg.grid_size;
  j["regressor"] = { { "hidden_layers", cfg.regressor_layers },
                     { "hidden_width", cfg.regressor_width },
                     { "train", train_json(cfg.regressor_train) } };
  j["score"] = { { "hidden_layers", cfg.score_layers },
                 { "hidden_width", cfg.score_width },
                 { "truncation_level",
                   cfg.score_truncation ? ordered_json(*cfg.score_truncation) : ordered_json() },
                 { "train", train_json(cfg.score_train) } };
  j["tests"] = { { "t", cfg.tests.t },
                 { "t_set", cfg.tests.t_set },
                 { "alpha", cfg.tests.alpha },
                 { "weights", cfg.tests.resolved_weights() } };
  if (cfg.tests.gamma)
    j["tests"]["gamma"] = *cfg.tests.gamma;
  else
    j["tests"]["gamma"] = nullptr;
  j["seed"] = cfg.seed;
  return j;
}

ordered_json outcome_to_json(const TestOutcome& t)
{
  ordered_json j;
  j["gamma"] = t.gamma;
  j["t_values"] = t.t_values;
  j["eta"] = t.etas;
  j["eta_fixed_t"] = t.eta_fixed;
  j["variance"] = t.variance.value;
  j["variance_degenerate"] = t.variance.degenerate;
  j["fixed_t"] = { { "z_value", t.fixed_t.z_value },
                   { "threshold", t.fixed_t.threshold },
                   { "ratio", t.fixed_t.ratio },
                   { "decision", to_string(t.fixed_t.decision) } };
  j["sup"] = { { "statistic", t.sup.statistic },
               { "normalized", t.sup.normalized },
               { "threshold", t.sup.threshold },
               { "ratio", t.sup.ratio },
               { "decision", to_string(t.sup.decision) } };
  j["square"] = { { "statistic", t.square.statistic },
                  { "unnormalized_sum", t.square.unnormalized },
                  { "normalized", t.square.normalized },
                  { "threshold", t.square.threshold },
                  { "ratio", t.square.ratio },
                  { "decision", to_string(t.square.decision) } };
  j["intervals"] = { { "fixed_t", { 0.0, t.intervals.fixed_t } },
                     { "sup", { 0.0, t.intervals.sup } },
                     { "square", { 0.0, t.intervals.square } } };
  return j;
}

ordered_json report_to_json(const TestReport& rep)
{
  ordered_json j;
  j["coordinate"] = rep.coordinate + 1;
  j["column"] = rep.column_name;
  j["mode"] = to_string(rep.mode);
  j["total_rows"] = rep.total_rows;
  j["estimation_rows"] = rep.estimation_rows;
  j["reserved_rows"] = rep.reserved_rows;
  j["rbar"] = rep.rbar;
  j["input_dim"] = rep.input_dim;
  j["half_width"] = rep.half_width;
  j["regressor"] = { { "truncation_level", rep.regressor_truncation },
                     { "best_validation_loss", rep.regressor_validation_loss },
                     { "epochs_run", rep.regressor_epochs } };
  j["score_truncation"] = rep.score_truncation;
  j["seeds"] = { { "regressor", rep.seeds.regressor },
                 { "score", rep.seeds.score },
                 { "cv", rep.seeds.cv } };
  if (rep.cv) {
    j["cv"] = { { "bandwidths", rep.cv->bandwidths },
                { "scores", rep.cv->scores },
                { "best_bandwidth", rep.cv->best_bandwidth },
                { "best_score", rep.cv->best_score } };
  } else {
    j["cv"] = nullptr;
  }
  ordered_json results = ordered_json::array();
  for (const BandwidthReport& br : rep.results) {
    ordered_json r;
    r["bandwidth"] = br.bandwidth;
    r["interior_count"] = br.interior_count;
    r["delta"] = br.delta;
    r["delta_degenerate"] = br.delta_degenerate;
    r["orthogonality"] = br.orthogonality;
    r["score"] = { { "final_train_loss", br.score_final_loss },
                   { "best_validation_loss", br.score_validation_loss },
                   { "epochs_run", br.score_epochs } };
    r["centered"] = outcome_to_json(br.centered.tests);
    r["non_centered"] = outcome_to_json(br.non_centered.tests);
    if (br.score_model)
      r["score_model"] = model_to_json(*br.score_model);
    results.push_back(std::move(r));
  }
  j["results"] = std::move(results);
  j["metadata"] = {
    { "input_standardization",
      "network inputs mapped per column from the empirical range to [-1, 1]; "
      "bandwidths, smoothing and derivatives on the original scale" },
    { "square_normalization",
      "statistic divides the weighted sum by the total weight; unnormalized_sum omits it" },
    { "non_centered_variant",
      "derivatives and residuals of the uncentered regressor; variance still uses the score" },
    { "coordinate_base", 1 }
  };
  j["config"] = config_to_json(rep.config);
  if (rep.regressor_model)
    j["regressor_model"] = model_to_json(*rep.regressor_model);
  if (rep.projector)
    j["projector"] = matrix_json(*rep.projector);
  return j;
}

std::string report_json_string(const TestReport& rep)
{
  return report_to_json(rep).dump(2) + "\n";
}

namespace {

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

} // namespace

std::string intervals_svg(const std::vector<TestReport>& reports)
{
  struct Bar
  {
    std::string label;
    double ratio;
  };
  std::vector<Bar> bars;
  for (const TestReport& rep : reports) {
    if (rep.results.empty())
      continue;
    const BandwidthReport& br = rep.primary();
    const std::string name = rep.column_name.empty()
                               ? "X" + std::to_string(rep.coordinate + 1)
                               : rep.column_name;
    for (int v = 0; v < 2; ++v) {
      const TestOutcome& t = v == 0 ? br.centered.tests : br.non_centered.tests;
      const char* var = v == 0 ? "centered" : "non-centered";
      bars.push_back({ name + " fixed-t " + var, t.intervals.fixed_t });
      bars.push_back({ name + " sup " + var, t.intervals.sup });
      bars.push_back({ name + " square " + var, t.intervals.square });
    }
  }

  double top = 2.0;
  for (const Bar& b : bars) {
    if (std::isfinite(b.ratio))
      top = std::max(top, b.ratio);
  }
  top = std::ceil(top);

  const double left = 260.0;
  const double width = 480.0;
  const double row = 18.0;
  const double head = 30.0;
  const double height = head + row * static_cast<double>(bars.size()) + 30.0;
  auto x_of = [&](double r) { return left + width * std::clamp(r, 0.0, top) / top; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(left + width + 40.0) +
       "\" height=\"" + fmt(height) + "\" font-family=\"monospace\" font-size=\"11\">\n";
  s += "<text x=\"10\" y=\"18\">significance intervals [0, ratio]; ratio above 1 rejects</text>\n";
  for (std::size_t k = 0; k < bars.size(); ++k) {
    const double y = head + row * static_cast<double>(k);
    const Bar& b = bars[k];
    const double r = std::isfinite(b.ratio) ? b.ratio : 0.0;
    const char* colour = r > 1.0 ? "#c0392b" : "#2c7fb8";
    s += "<text x=\"10\" y=\"" + fmt(y + 12.0) + "\">" + escape_xml(b.label) + "</text>\n";
    s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(y + 3.0) + "\" width=\"" +
         fmt(x_of(r) - left) + "\" height=\"10\" fill=\"" + colour + "\"/>\n";
    s += "<text x=\"" + fmt(x_of(r) + 4.0) + "\" y=\"" + fmt(y + 12.0) + "\">" + fmt(r) +
         "</text>\n";
  }
  const double axis_y = head + row * static_cast<double>(bars.size()) + 4.0;
  s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(axis_y) + "\" x2=\"" + fmt(left + width) +
       "\" y2=\"" + fmt(axis_y) + "\" stroke=\"black\"/>\n";
  const int step = std::max(1, static_cast<int>(std::ceil(top / 10.0)));
  for (int tick = 0; tick <= static_cast<int>(top); tick += step) {
    const double x = x_of(tick);
    s += "<text x=\"" + fmt(x - 3.0) + "\" y=\"" + fmt(axis_y + 14.0) + "\">" +
         std::to_string(tick) + "</text>\n";
  }
  const double one = x_of(1.0);
  s += "<line x1=\"" + fmt(one) + "\" y1=\"" + fmt(head) + "\" x2=\"" + fmt(one) + "\" y2=\"" +
       fmt(axis_y) + "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
  s += "</svg>\n";
  return s;
}

} // namespace nscreen
