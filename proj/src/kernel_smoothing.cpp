#include "neural_screen/kernel_smoothing.hpp"

#include "neural_screen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nscreen {

double kernel_eval(double u)
{
  if (std::abs(u) > 1.0)
    return 0.0;
  const double w = 1.0 - u * u;
  return 0.9375 * w * w;
}

double kernel_deriv(double u)
{
  if (std::abs(u) > 1.0)
    return 0.0;
  return -3.75 * u * (1.0 - u * u);
}

void SmoothingSpec::validate() const
{
  if (!(bandwidth > 0.0))
    throw screen_error("bandwidth must be positive");
  if (grid_size < 1)
    throw screen_error("Riemann grid size must be positive");
  if (!(half_width > 0.0))
    throw screen_error("support half-width must be positive");
  if (bandwidth > half_width)
    throw screen_error("bandwidth " + std::to_string(bandwidth) +
                       " exceeds the support half-width " +
                       std::to_string(half_width));
}

std::vector<double> SmoothingSpec::midpoints() const
{
  const double n = static_cast<double>(grid_size);
  std::vector<double> a(2 * grid_size);
  for (int l = 1; l <= 2 * grid_size; ++l)
    a[l - 1] = -1.0 - 1.0 / (2.0 * n) + static_cast<double>(l) / n;
  return a;
}

std::vector<double> SmoothingSpec::nodes() const
{
  std::vector<double> a = midpoints();
  a.push_back(-1.0);
  a.push_back(1.0);
  return a;
}

std::vector<double> SmoothingSpec::weights() const
{
  std::vector<double> w = midpoints();
  const double n = static_cast<double>(grid_size);
  const double scale = 1.0 / (n * bandwidth);
  for (double& v : w)
    v = kernel_deriv(v) * scale;
  // Euler-Maclaurin endpoint terms; Kddot(+-1) = 7.5
  const double end = 7.5 / (24.0 * n * n * bandwidth);
  w.push_back(-end);
  w.push_back(end);
  return w;
}

namespace {

void require_interior(const SmoothingSpec& spec, double x)
{
  if (!spec.interior(x))
    throw boundary_violation("x_j = " + std::to_string(x) +
                             " lies outside the interior [" +
                             std::to_string(spec.interior_lo()) + ", " +
                             std::to_string(spec.interior_hi()) + "]");
}

constexpr Index kPointsPerChunk = 512;

} // namespace

double smoothed_partial(const PointFunction& f,
                        const VectorXd& point,
                        Index coord,
                        const SmoothingSpec& spec)
{
  spec.validate();
  if (coord < 0 || coord >= point.size())
    throw shape_error("smoothing coordinate out of range");
  const double x = point(coord);
  require_interior(spec, x);
  const std::vector<double> a = spec.nodes();
  const std::vector<double> w = spec.weights();
  VectorXd shifted = point;
  double sum = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    shifted(coord) = x - a[l] * spec.bandwidth;
    sum += w[l] * f(shifted);
  }
  return sum;
}

VectorXd smoothed_partials(const BatchFunction& f,
                           const MatrixXd& points,
                           Index coord,
                           const SmoothingSpec& spec)
{
  spec.validate();
  if (coord < 0 || coord >= points.cols())
    throw shape_error("smoothing coordinate out of range");
  for (Index i = 0; i < points.rows(); ++i)
    require_interior(spec, points(i, coord));

  const std::vector<double> a = spec.nodes();
  const std::vector<double> w = spec.weights();
  const Index g = static_cast<Index>(a.size());
  VectorXd out = VectorXd::Zero(points.rows());
  MatrixXd expanded;
  for (Index start = 0; start < points.rows(); start += kPointsPerChunk) {
    const Index len = std::min(kPointsPerChunk, points.rows() - start);
    expanded.resize(len * g, points.cols());
    for (Index i = 0; i < len; ++i) {
      const double x = points(start + i, coord);
      for (Index l = 0; l < g; ++l) {
        expanded.row(i * g + l) = points.row(start + i);
        expanded(i * g + l, coord) = x - a[l] * spec.bandwidth;
      }
    }
    const VectorXd values = f(expanded);
    for (Index i = 0; i < len; ++i) {
      double s = 0.0;
      for (Index l = 0; l < g; ++l)
        s += w[l] * values(i * g + l);
      out(start + i) = s;
    }
  }
  return out;
}

VectorXd smoothed_partials(const NetworkModel& model,
                           const MatrixXd& points,
                           Index coord,
                           const SmoothingSpec& spec)
{
  return smoothed_partials(
    [&model](const MatrixXd& rows) { return forward_rows(model, rows); },
    points,
    coord,
    spec);
}

std::vector<Index> interior_indices(const VectorXd& x_col,
                                    const SmoothingSpec& spec)
{
  std::vector<Index> idx;
  for (Index i = 0; i < x_col.size(); ++i) {
    if (spec.interior(x_col(i)))
      idx.push_back(i);
  }
  return idx;
}

MatrixXd select_rows(const MatrixXd& m, const std::vector<Index>& rows)
{
  MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

VectorXd select_rows(const VectorXd& v, const std::vector<Index>& rows)
{
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    out(static_cast<Index>(k)) = v(rows[k]);
  return out;
}

void select_bandwidth(CvResult& table)
{
  table.best_score = std::numeric_limits<double>::infinity();
  table.best_bandwidth = table.bandwidths.empty() ? 0.0 : table.bandwidths[0];
  bool found = false;
  for (std::size_t k = 0; k < table.bandwidths.size(); ++k) {
    const double s = table.scores[k];
    const double h = table.bandwidths[k];
    if (!found || s < table.best_score ||
        (s == table.best_score && h > table.best_bandwidth)) {
      table.best_score = s;
      table.best_bandwidth = h;
      found = true;
    }
  }
}

CvResult cv_bandwidth(const MatrixXd& inputs,
                      const VectorXd& targets,
                      Index coord,
                      const CvSettings& settings,
                      const NetworkArchitecture& arch,
                      const TrainConfig& cfg)
{
  if (settings.candidates.empty())
    throw screen_error("bandwidth candidate list is empty");
  if (settings.folds < 2)
    throw screen_error("cross validation needs at least 2 folds");
  if (inputs.rows() != targets.size())
    throw shape_error("one target per input row required");
  if (coord < 0 || coord >= inputs.cols())
    throw shape_error("CV coordinate out of range");

  const Index n = inputs.rows();
  const int k_folds = settings.folds;
  if (n / k_folds < settings.min_fold_size)
    throw fold_size_error("folds of " + std::to_string(n / k_folds) +
                          " samples are too small to train (minimum " +
                          std::to_string(settings.min_fold_size) + ")");

  const double b = settings.half_width > 0.0
                     ? settings.half_width
                     : inputs.col(coord).cwiseAbs().maxCoeff();

  // contiguous blocks after a seeded shuffle
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{ 0 });
  Rng rng(derive_seed(cfg.rng_seed, "cv-folds"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> folds(k_folds);
  for (Index i = 0; i < n; ++i)
    folds[static_cast<std::size_t>(i * k_folds / n)].push_back(order[i]);

  const InputScaling scaling = InputScaling::fit(inputs);
  CvResult result;
  result.bandwidths = settings.candidates;
  result.scores.assign(settings.candidates.size(), 0.0);
  std::vector<bool> any_interior(settings.candidates.size(), false);

  for (int k = 0; k < k_folds; ++k) {
    std::vector<Index> rest;
    for (int q = 0; q < k_folds; ++q) {
      if (q != k)
        rest.insert(rest.end(), folds[q].begin(), folds[q].end());
    }
    std::sort(rest.begin(), rest.end());
    std::vector<Index> fold = folds[k];
    std::sort(fold.begin(), fold.end());

    TrainConfig out_cfg = cfg;
    out_cfg.rng_seed = derive_seed(cfg.rng_seed, "cv-out", k);
    TrainConfig in_cfg = cfg;
    in_cfg.rng_seed = derive_seed(cfg.rng_seed, "cv-in", k);

    const MatrixXd fold_x = select_rows(inputs, fold);
    const NetworkModel outside =
      train_regressor(select_rows(inputs, rest),
                      select_rows(targets, rest),
                      arch,
                      out_cfg,
                      scaling)
        .model;
    const NetworkModel inside =
      train_regressor(fold_x, select_rows(targets, fold), arch, in_cfg, scaling)
        .model;
    const VectorXd raw = input_partials(inside, fold_x, coord);

    for (std::size_t c = 0; c < settings.candidates.size(); ++c) {
      SmoothingSpec spec{ settings.candidates[c], settings.grid_size, b };
      if (!(spec.bandwidth > 0.0) || spec.bandwidth > b)
        continue;
      const std::vector<Index> in = interior_indices(fold_x.col(coord), spec);
      if (in.empty())
        continue;
      any_interior[c] = true;
      const VectorXd smooth =
        smoothed_partials(outside, select_rows(fold_x, in), coord, spec);
      for (std::size_t q = 0; q < in.size(); ++q) {
        const double gap = smooth(static_cast<Index>(q)) - raw(in[q]);
        result.scores[c] += gap * gap;
      }
    }
  }
  for (std::size_t c = 0; c < result.scores.size(); ++c) {
    if (!any_interior[c])
      result.scores[c] = std::numeric_limits<double>::infinity();
  }
  select_bandwidth(result);
  return result;
}

} // namespace nscreen
