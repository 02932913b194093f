#pragma once

#include "neural_screen/dataset.hpp"
#include "neural_screen/factor_projection.hpp"
#include "neural_screen/kernel_smoothing.hpp"
#include "neural_screen/nn_core.hpp"
#include "neural_screen/test_statistics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nscreen {

enum class ScreenMode
{
  high_dim,
  low_dim
};

const char* to_string(ScreenMode m);

struct PipelineConfig
{
  ScreenMode mode = ScreenMode::high_dim;
  //! Number of diversified factors (high_dim only).
  Index rbar = 4;
  //! Rows reserved for the projector; default min(100, ceil(5 log n) * rbar).
  std::optional<Index> reserved_rows;
  //! Bandwidths evaluated when no CV grid is given. All share one regressor
  //! and one score seed; the first is the primary result.
  std::vector<double> bandwidths{ 1.0 };
  //! When non-empty, h is chosen by cross validation over this grid.
  std::vector<double> cv_grid;
  int cv_folds = 5;
  int grid_size = 50;

  int regressor_layers = 5;
  int regressor_width = 16;
  //! Default 10 * max |Y| over the estimation sample.
  std::optional<double> regressor_truncation;
  int score_layers = 2;
  int score_width = 16;
  //! Default 10 * max_i |x_ij - mean| / var(x_j), ten times the largest
  //! Gaussian reference score on the sample.
  std::optional<double> score_truncation;

  TrainConfig regressor_train{ 800, 256, 0.005, 20, 0.2, 0 };
  TrainConfig score_train{ 400, 64, 0.005, 20, 0.2, 0 };
  TestConfig tests;
  std::uint64_t seed = 0;
  //! Embed trained weights in the report.
  bool include_models = false;
  //! Worker cap for screen_all; NEURAL_SCREEN_THREADS overrides.
  unsigned threads = 1;

  void validate() const;
};

//! Statistics for one estimator variant (centered g_check or raw g_hat).
struct VariantReport
{
  TestOutcome tests;
};

struct BandwidthReport
{
  double bandwidth = 0.0;
  Index interior_count = 0;
  double delta = 0.0;
  bool delta_degenerate = false;
  //! sum (Y - g_check) alpha over the estimation sample.
  double orthogonality = 0.0;
  double score_final_loss = 0.0;
  double score_validation_loss = 0.0;
  int score_epochs = 0;
  VariantReport centered;
  VariantReport non_centered;
  std::optional<NetworkModel> score_model;
};

struct StageSeeds
{
  std::uint64_t regressor = 0;
  std::uint64_t score = 0;
  std::uint64_t cv = 0;
};

struct TestReport
{
  //! 0-based predictor index and its name.
  Index coordinate = 0;
  std::string column_name;
  ScreenMode mode = ScreenMode::high_dim;
  Index total_rows = 0;
  Index estimation_rows = 0;
  Index reserved_rows = 0;
  Index rbar = 0;
  Index input_dim = 0;
  double half_width = 0.0;
  double regressor_truncation = 0.0;
  double score_truncation = 0.0;
  double regressor_validation_loss = 0.0;
  int regressor_epochs = 0;
  StageSeeds seeds;
  std::optional<CvResult> cv;
  //! One entry per evaluated bandwidth; the first is the primary one.
  std::vector<BandwidthReport> results;
  std::optional<NetworkModel> regressor_model;
  std::optional<MatrixXd> projector;
  PipelineConfig config;

  const BandwidthReport& primary() const { return results.front(); }
};

Index default_reserved_rows(Index n, Index rbar);
double default_score_truncation(const VectorXd& xj);

//! Reserved-row projector for high_dim mode, nothing in low_dim mode.
std::optional<DiversifiedProjector> prepare_projector(const Dataset& data,
                                                      const PipelineConfig& cfg);

//! Screens predictor `j` (0-based). Errors come out as stage_error.
TestReport screen_coordinate(const Dataset& data, Index j, const PipelineConfig& cfg);

//! Same with a projector pretrained by the caller.
TestReport screen_coordinate(const Dataset& data,
                             Index j,
                             const PipelineConfig& cfg,
                             const std::optional<DiversifiedProjector>& projector);

//! Screens every listed coordinate with one shared projector; reports follow
//! the input order.
std::vector<TestReport> screen_all(const Dataset& data,
                                   const std::vector<Index>& coords,
                                   const PipelineConfig& cfg);

} // namespace nscreen
