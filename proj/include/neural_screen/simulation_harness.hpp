#pragma once

#include "neural_screen/dataset.hpp"
#include "neural_screen/screening_pipeline.hpp"
#include "neural_screen/test_statistics.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nscreen {

enum class DgpModel
{
  nonlinear,
  linear
};

enum class Hypothesis
{
  null,
  alternative
};

const char* to_string(DgpModel m);
const char* to_string(Hypothesis h);

struct DGPSpec
{
  DgpModel model = DgpModel::nonlinear;
  Hypothesis hypothesis = Hypothesis::null;
  Index n = 512;
  Index d = 400;
  //! Extra rows prepended for projector pretraining.
  Index extra_rows = 100;
  //! Second parameter of N(0, .) for factors/idiosyncratic terms and noise.
  double factor_var = 0.6;
  double noise_var = 0.3;
  //! Read the N(0, .) parameters as standard deviations instead of variances.
  bool sd_reading = false;
  //! 0-based predictor carrying the alternative signal (X_3).
  Index signal_coord = 2;
  std::uint64_t seed = 0;

  //! 4 factors for the nonlinear model, 5 for the linear one.
  Index factor_count() const { return model == DgpModel::nonlinear ? 4 : 5; }
  Index total_rows() const { return n + extra_rows; }
  void validate() const;
};

//! Generated data with the latent pieces kept for checks.
struct DGPSample
{
  Dataset data;
  MatrixXd B;   //!< d x r loadings
  MatrixXd F;   //!< rows x r factors
  MatrixXd U;   //!< rows x d idiosyncratic terms
  VectorXd eps; //!< response noise
  VectorXd m0;  //!< null regression function at each row
};

double nonlinear_null_mean(const VectorXd& f, double u1);
double linear_null_mean(const VectorXd& f);
//! Term added to the null mean under the alternative.
double alternative_increment(DgpModel model, double x3);

//! Draws B, F, U and the noise in a fixed order, so the null and alternative
//! of one seed share every random draw and differ only by the added signal.
DGPSample gen_dgp(const DGPSpec& spec);

enum class TestKind
{
  fixed_t = 0,
  sup = 1,
  square = 2
};

const char* to_string(TestKind k);

//! decisions[variant][test][bandwidth]; variant 0 is centered, 1 non-centered.
struct ReplicationOutcome
{
  std::array<std::array<std::vector<Decision>, 3>, 2> decisions;
};

using ReplicationFn =
  std::function<ReplicationOutcome(const DGPSpec& dgp, const PipelineConfig& cfg)>;

struct McSettings
{
  Index replications = 200;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  //! Replaces the default pipeline run (harness self-tests).
  ReplicationFn replicate;
  std::function<void(Index done, Index total)> progress;
};

struct McCell
{
  Index rejections = 0;
  Index no_decisions = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct McTable
{
  DGPSpec dgp;
  std::vector<double> bandwidths;
  double alpha = 0.05;
  Index replications = 0;
  Index failures = 0;
  std::vector<std::string> failure_messages;
  //! cells[variant][test][bandwidth]
  std::array<std::array<std::vector<McCell>, 3>, 2> cells;

  const McCell& cell(bool centered, TestKind t, std::size_t h) const
  {
    return cells[centered ? 0 : 1][static_cast<int>(t)][h];
  }
};

//! Table hyperparameters: L=5/k=16 regressor, L=2/batch 64 score network,
//! rbar = r, the extra rows reserved for W, h in {0.1, 1.0, 1.5, 2.0}.
PipelineConfig paper_pipeline_config(const DGPSpec& dgp);

//! Seed of replication `r` under a master seed.
std::uint64_t replication_seed(std::uint64_t master, Index r);

//! One replication: generate, screen the signal coordinate, collect decisions.
ReplicationOutcome run_replication(const DGPSpec& dgp, const PipelineConfig& cfg);

//! Rejection rate per (variant, test, bandwidth) cell over R replications.
//! Replication r uses replication_seed(settings.seed, r) for both the data
//! and the pipeline; failed replications are counted and excluded.
McTable run_monte_carlo(const DGPSpec& dgp, const PipelineConfig& cfg, const McSettings& settings);

//! Paper layout: one row per (test, variant), one column per bandwidth, cells
//! "size (power)" when a power table is given.
std::string format_table_csv(const McTable& size, const McTable* power);
//! Rates with binomial +-2 sqrt(p(1-p)/R) bands and run metadata.
std::string format_table_json(const McTable& size, const McTable* power);

} // namespace nscreen
