#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metrics/metrics.hpp"

namespace diffdetect::experiments {

enum class TableFormat { kMarkdown, kCsv };

// kIntra: one row per (model, dataset, mode, features).
// kCross: adds the train and test generator columns.
enum class TableLayout { kIntra, kCross };

struct CategoryRow {
  metrics::CellMetadata cell;
  metrics::CategoryErrorReport report;
};

std::string display_dataset(std::string_view key);
std::string display_mode(std::string_view key, TableLayout layout);
std::string display_features(std::string_view key);
std::string display_generator(std::string_view key);

// Percentages rendered with one decimal; undefined values as "n/a".
std::string format_pct(double value);

// Rows follow the order of `reports`.
std::string render_tables(std::span<const metrics::EvalReport> reports, TableFormat format,
                          TableLayout layout);

std::string render_category_table(std::span<const CategoryRow> rows, TableFormat format);

}  // namespace diffdetect::experiments
