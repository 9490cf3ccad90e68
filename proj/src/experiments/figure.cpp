#include "experiments/figure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "common/error.hpp"

namespace diffdetect::experiments {

namespace {

struct Rgb {
  int r, g, b;
};

constexpr Rgb kNeg{0x21, 0x66, 0xac};
constexpr Rgb kMid{0xf7, 0xf7, 0xf7};
constexpr Rgb kPos{0xb2, 0x18, 0x2b};

constexpr int kCellW = 90;
constexpr int kCellH = 22;
constexpr int kLabelW = 150;
constexpr int kTop = 40;

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string diverging_color(double r) {
  const double t = std::clamp(std::abs(r), 0.0, 1.0);
  const Rgb end = r < 0 ? kNeg : kPos;
  const auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + t * (b - a))); };
  return hex({mix(kMid.r, end.r), mix(kMid.g, end.g), mix(kMid.b, end.b)});
}

std::vector<HeatCell> heat_cells(const linguistics::CorrelationReport& report) {
  std::vector<HeatCell> cells;
  for (const auto name : linguistics::kFeatureNames) {
    HeatCell c{std::string(name), std::nullopt, "url(#undefined)"};
    const auto it = report.features.find(c.feature);
    if (it != report.features.end() && std::isfinite(it->second)) {
      c.r = it->second;
      c.fill = diverging_color(it->second);
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

std::string render_correlation_svg(const linguistics::CorrelationReport& report) {
  const auto cells = heat_cells(report);
  if (std::none_of(cells.begin(), cells.end(), [](const HeatCell& c) { return c.r.has_value(); })) {
    fail(ErrorCode::kInvalidArgument, "correlation report has no defined feature");
  }
  const int width = kLabelW + kCellW + 20;
  const int height = kTop + static_cast<int>(cells.size()) * kCellH + 20;
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\" font-family=\"sans-serif\" font-size=\"12\">\n",
                width, height, width, height);
  out += buf;
  out +=
      "<defs><pattern id=\"undefined\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
      "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>"
      "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#999999\" stroke-width=\"2\"/>"
      "</pattern></defs>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"20\" font-weight=\"bold\">%s</text>\n", 10,
                xml_escape(report.model + " / " + report.generator + " (n=" +
                           std::to_string(report.n) + ")")
                    .c_str());
  out += buf;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const int y = kTop + static_cast<int>(i) * kCellH;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%s</text>\n"
                  "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\" "
                  "stroke=\"#ffffff\"/>\n",
                  kLabelW - 8, y + 15, c.feature.c_str(), kLabelW, y, kCellW, kCellH,
                  c.fill.c_str());
    out += buf;
    std::string value = "undefined";
    if (c.r) {
      char v[32];
      std::snprintf(v, sizeof v, "%.3f", *c.r);
      value = v;
    }
    const bool dark = c.r && std::abs(*c.r) > 0.6;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" fill=\"%s\">%s</text>\n",
                  kLabelW + kCellW / 2, y + 15, dark ? "#ffffff" : "#000000", value.c_str());
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace diffdetect::experiments
