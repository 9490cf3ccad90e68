#pragma once

#include <optional>
#include <string>
#include <vector>

#include "linguistics/linguistics.hpp"

namespace diffdetect::experiments {

struct HeatCell {
  std::string feature;
  std::optional<double> r;  // empty when undefined
  std::string fill;         // "#rrggbb", or "url(#undefined)"
};

// Diverging scale centred on 0: blue at -1, near-white at 0, red at +1.
std::string diverging_color(double r);

// One cell per caption feature in canonical order.
std::vector<HeatCell> heat_cells(const linguistics::CorrelationReport& report);

// Deterministic SVG heatmap of one correlation report. Undefined features are
// hatched. Throws Error(kInvalidArgument) if no feature is defined.
std::string render_correlation_svg(const linguistics::CorrelationReport& report);

}  // namespace diffdetect::experiments
