#include "neural_screen/test_statistics.hpp"

#include "neural_screen/errors.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <string>

namespace nscreen {

double TruncationPsi::operator()(double x) const
{
  if (std::abs(x) <= gamma)
    return x;
  const double s = x > 0.0 ? 1.0 : -1.0;
  return s * gamma - 0.5 + 1.0 / (1.0 + std::exp(-4.0 * (x - s * gamma)));
}

double TruncationPsi::derivative(double x) const
{
  if (std::abs(x) <= gamma)
    return 1.0;
  const double s = x > 0.0 ? 1.0 : -1.0;
  const double e = std::exp(-4.0 * (x - s * gamma));
  if (!std::isfinite(e))
    return 0.0;
  return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

double psi_eval(double x, const TruncationPsi& psi)
{
  return psi(x);
}

double psi_deriv(double x, const TruncationPsi& psi)
{
  return psi.derivative(x);
}

void TestConfig::validate() const
{
  if (t == 0.0 || !std::isfinite(t))
    throw screen_error("fixed t must be a finite nonzero value");
  if (t_set.empty())
    throw screen_error("t set is empty");
  for (double v : t_set) {
    if (v == 0.0 || !std::isfinite(v))
      throw screen_error("t set must not contain zero");
  }
  if (!(alpha > 0.0 && alpha < 1.0))
    throw screen_error("alpha must lie in (0, 1)");
  if (!weights.empty()) {
    if (weights.size() != t_set.size())
      throw screen_error("need one weight per t value");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw screen_error("weights must be finite and nonnegative");
      total += w;
    }
    if (!(total > 0.0))
      throw screen_error("weights sum to zero");
  }
  if (gamma && !(*gamma > 0.0))
    throw screen_error("psi gamma must be positive");
}

std::vector<double> TestConfig::resolved_weights() const
{
  if (weights.empty())
    return std::vector<double>(t_set.size(), 1.0);
  return weights;
}

const char* to_string(Decision d)
{
  switch (d) {
    case Decision::accept:
      return "accept";
    case Decision::reject:
      return "reject";
    case Decision::no_decision:
      break;
  }
  return "no_decision";
}

double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw screen_error("quantile level must lie in (0, 1)");
  static constexpr double a[] = { -3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00 };
  static constexpr double b[] = { -5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01 };
  static constexpr double c[] = { -7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00 };
  static constexpr double d[] = { 7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00 };
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // one Halley step
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double chi_square1_quantile(double p)
{
  const double z = normal_quantile(0.5 + 0.5 * p);
  return z * z;
}

double eta_check(const VectorXd& interior_derivs,
                 std::size_t n,
                 double t,
                 const TruncationPsi& psi)
{
  if (n == 0)
    throw insufficient_samples("eta needs at least one sample");
  if (static_cast<std::size_t>(interior_derivs.size()) > n)
    throw shape_error("more interior derivatives than samples");
  double sum = 0.0;
  for (Index i = 0; i < interior_derivs.size(); ++i)
    sum += std::expm1(t * psi(interior_derivs(i)));
  return sum / static_cast<double>(n);
}

VarianceEstimate variance_est(const VectorXd& residuals, const VectorXd& scores)
{
  if (residuals.size() != scores.size())
    throw shape_error("residuals and scores differ in length");
  if (residuals.size() == 0)
    throw insufficient_samples("variance needs at least one sample");
  const double ms =
    residuals.cwiseProduct(scores).squaredNorm() / static_cast<double>(residuals.size());
  const double v = std::sqrt(ms);
  return { v, !(v > 0.0) || !std::isfinite(v) };
}

namespace {

bool usable(double variance)
{
  return variance > 0.0 && std::isfinite(variance);
}

Decision from_ratio(double ratio)
{
  return ratio > 1.0 ? Decision::reject : Decision::accept;
}

void check_grid(const std::vector<double>& etas, const std::vector<double>& ts)
{
  if (etas.size() != ts.size() || ts.empty())
    throw shape_error("need one statistic per t value");
}

} // namespace

FixedTOutcome fixed_t_decision(double eta,
                               double variance,
                               double t,
                               std::size_t n,
                               double alpha)
{
  FixedTOutcome out;
  out.threshold = normal_quantile(1.0 - alpha / 2.0);
  if (!usable(variance))
    return out;
  out.z_value = std::sqrt(static_cast<double>(n)) * eta / (t * variance);
  out.ratio = std::abs(out.z_value) / out.threshold;
  out.decision = from_ratio(out.ratio);
  return out;
}

SupOutcome sup_decision(const std::vector<double>& etas,
                        const std::vector<double>& ts,
                        double variance,
                        std::size_t n,
                        double alpha)
{
  check_grid(etas, ts);
  SupOutcome out;
  double m = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k)
    m = std::max(m, std::abs(etas[k] / ts[k]));
  out.statistic = std::sqrt(static_cast<double>(n)) * m;
  out.threshold = normal_quantile(1.0 - alpha / 2.0);
  if (!usable(variance))
    return out;
  out.normalized = out.statistic / variance;
  out.ratio = out.normalized / out.threshold;
  out.decision = from_ratio(out.ratio);
  return out;
}

SquareOutcome square_decision(const std::vector<double>& etas,
                              const std::vector<double>& ts,
                              const std::vector<double>& weights,
                              double variance,
                              std::size_t n,
                              double alpha)
{
  check_grid(etas, ts);
  if (weights.size() != ts.size())
    throw shape_error("need one weight per t value");
  SquareOutcome out;
  double sum = 0.0;
  double wsum = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double q = etas[k] / ts[k];
    sum += weights[k] * q * q;
    wsum += weights[k];
  }
  if (!(wsum > 0.0))
    throw screen_error("weights sum to zero");
  const double nn = static_cast<double>(n);
  out.unnormalized = nn * sum;
  out.statistic = nn * sum / wsum;
  out.threshold = chi_square1_quantile(1.0 - alpha);
  if (!usable(variance))
    return out;
  out.normalized = out.statistic / (variance * variance);
  out.ratio = std::sqrt(out.normalized) / std::sqrt(out.threshold);
  out.decision = from_ratio(out.ratio);
  return out;
}

SignificanceIntervals significance_intervals(const FixedTOutcome& fixed,
                                             const SupOutcome& sup,
                                             const SquareOutcome& square)
{
  assert((fixed.ratio > 1.0) == (fixed.decision == Decision::reject));
  assert((sup.ratio > 1.0) == (sup.decision == Decision::reject));
  assert((square.ratio > 1.0) == (square.decision == Decision::reject));
  return { fixed.ratio, sup.ratio, square.ratio };
}

double default_gamma(const VectorXd& derivs)
{
  const double m = derivs.size() > 0 ? derivs.cwiseAbs().maxCoeff() : 0.0;
  if (!std::isfinite(m))
    return 5.0;
  return std::max(5.0, 4.0 * m);
}

TestOutcome run_tests(const VectorXd& interior_derivs,
                      std::size_t n,
                      const VectorXd& residuals,
                      const VectorXd& scores,
                      const TestConfig& cfg)
{
  cfg.validate();
  TestOutcome out;
  out.gamma = cfg.gamma ? *cfg.gamma : default_gamma(interior_derivs);
  const TruncationPsi psi{ out.gamma };
  out.variance = variance_est(residuals, scores);
  const double var = out.variance.degenerate ? 0.0 : out.variance.value;

  out.t_values = cfg.t_set;
  out.etas.reserve(cfg.t_set.size());
  for (double t : cfg.t_set)
    out.etas.push_back(eta_check(interior_derivs, n, t, psi));
  out.eta_fixed = eta_check(interior_derivs, n, cfg.t, psi);

  out.fixed_t = fixed_t_decision(out.eta_fixed, var, cfg.t, n, cfg.alpha);
  out.sup = sup_decision(out.etas, out.t_values, var, n, cfg.alpha);
  out.square =
    square_decision(out.etas, out.t_values, cfg.resolved_weights(), var, n, cfg.alpha);
  out.intervals = significance_intervals(out.fixed_t, out.sup, out.square);
  return out;
}

} // namespace nscreen
