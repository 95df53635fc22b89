#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfm/evaluation.hpp"

namespace cfm {

// Posterior fan: 5-95% and 25-75% bands, median line, observational scatter.
std::string posterior_fan_svg(const DemoResult& result, const std::string& title);

// One bar per label with its CI as a whisker; bars below zero are drawn downwards.
std::string delta_bars_svg(const std::vector<std::string>& labels, const std::vector<ConfidenceInterval>& deltas,
                           const std::string& title, const std::string& y_label);

// Inverse of the per-mode entries written by demo_to_json.
DemoResult demo_result_from_json(const nlohmann::json& mode);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cfm
