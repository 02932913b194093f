#pragma once

#include "neural_screen/nn_core.hpp"
#include "neural_screen/screening_pipeline.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace nscreen {

using ordered_json = nlohmann::ordered_json;

ordered_json model_to_json(const NetworkModel& model);
NetworkModel model_from_json(const ordered_json& j);

ordered_json config_to_json(const PipelineConfig& cfg);
ordered_json outcome_to_json(const TestOutcome& t);
ordered_json report_to_json(const TestReport& rep);
std::string report_json_string(const TestReport& rep);

//! Horizontal [0, ratio] bars, one per (coordinate, test, variant), for the
//! primary bandwidth. A dashed line marks ratio 1. Output is a pure function
//! of the reports.
std::string intervals_svg(const std::vector<TestReport>& reports);

} // namespace nscreen
