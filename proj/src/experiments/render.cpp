#include "experiments/render.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace diffdetect::experiments {

namespace {

std::string lookup(const std::map<std::string_view, std::string_view>& table, std::string_view key) {
  const auto it = table.find(key);
  return std::string(it == table.end() ? key : it->second);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& cells, TableFormat format) {
  std::string out;
  if (format == TableFormat::kMarkdown) {
    out = "|";
    for (const auto& c : cells) out += " " + c + " |";
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
  }
  return out + "\n";
}

std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows, TableFormat format) {
  std::string out = join(header, format);
  if (format == TableFormat::kMarkdown) {
    std::vector<std::string> rule(header.size(), "---");
    out += join(rule, format);
  }
  for (const auto& r : rows) out += join(r, format);
  return out;
}

std::string pct_or_na(const std::optional<double>& v) { return v ? format_pct(*v) : "n/a"; }

}  // namespace

std::string display_dataset(std::string_view key) {
  static const std::map<std::string_view, std::string_view> t = {{"mscoco", "MSCOCO"},
                                                                 {"wikimedia", "Wikipedia"}};
  return lookup(t, key);
}

std::string display_mode(std::string_view key, TableLayout layout) {
  static const std::map<std::string_view, std::string_view> intra = {{"image", "Image Only"},
                                                                     {"image_text", "Text+Image"}};
  static const std::map<std::string_view, std::string_view> cross = {{"image", "Image-Only"},
                                                                     {"image_text", "Image+Text"}};
  return lookup(layout == TableLayout::kIntra ? intra : cross, key);
}

std::string display_features(std::string_view key) {
  static const std::map<std::string_view, std::string_view> t = {
      {"clip-vit", "CLIP-VIT"}, {"clip-rn50", "CLIP-R50"}, {"stub", "STUB"}};
  return lookup(t, key);
}

std::string display_generator(std::string_view key) {
  static const std::map<std::string_view, std::string_view> t = {
      {"stable_diffusion", "Stable Diffusion"}, {"glide", "GLIDE"}, {"none", "-"}};
  return lookup(t, key);
}

std::string format_pct(double value) {
  if (!std::isfinite(value)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", value);
  return buf;
}

std::string render_tables(std::span<const metrics::EvalReport> reports, TableFormat format,
                          TableLayout layout) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    const auto& c = r.cell;
    if (layout == TableLayout::kIntra) {
      rows.push_back({c.model, display_dataset(c.dataset), display_mode(c.mode, layout),
                      display_features(c.features), format_pct(r.accuracy), format_pct(r.auc)});
    } else {
      rows.push_back({c.model, display_generator(c.train_generator),
                      display_generator(c.test_generator), display_mode(c.mode, layout),
                      display_features(c.features), format_pct(r.accuracy), format_pct(r.auc)});
    }
  }
  const std::vector<std::string> header =
      layout == TableLayout::kIntra
          ? std::vector<std::string>{"Model", "Dataset", "Mode", "Features", "Accuracy", "AUC"}
          : std::vector<std::string>{"Model", "Training Method", "Testing Method", "Mode",
                                     "Features", "Accuracy", "AUC"};
  return table(header, rows, format);
}

std::string render_category_table(std::span<const CategoryRow> rows, TableFormat format) {
  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    const auto& b = row.report.buckets;
    const auto get = [&](const char* key) {
      const auto it = b.find(key);
      return it == b.end() ? metrics::CategoryRates{} : it->second;
    };
    const auto an = get("animate");
    const auto in = get("inanimate");
    static const std::map<std::string_view, std::string_view> modes = {
        {"image", "Image-Only"}, {"image_text", "Text+Image"}};
    body.push_back({row.cell.model, lookup(modes, row.cell.mode),
                    display_features(row.cell.features), display_generator(row.cell.test_generator),
                    pct_or_na(an.fn_pct), pct_or_na(an.fp_pct), pct_or_na(in.fn_pct),
                    pct_or_na(in.fp_pct)});
  }
  return table({"Model", "Mode", "Features", "Generator", "Animated FN", "Animated FP",
                "Inanimate FN", "Inanimate FP"},
               body, format);
}

}  // namespace diffdetect::experiments
