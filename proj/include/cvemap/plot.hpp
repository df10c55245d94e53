#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvemap/eval.hpp"

namespace cvemap::plot {

/// Standalone SVG with one labelled bar per entry, value axis from 0 to `max_value`.
std::string bar_chart_svg(const std::string& title, std::span<const std::pair<std::string, double>> bars,
                          double max_value = 1.0);

/// Writes mrr.svg, map_at_K.svg and ndcg_at_K.svg under `dir`, one bar per report.
/// Returns the files written.
std::vector<std::filesystem::path> write_metric_charts(std::span<const eval::EvalReport> reports,
                                                       const std::filesystem::path& dir);

}  // namespace cvemap::plot
