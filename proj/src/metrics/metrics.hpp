#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace diffdetect::metrics {

// Positive class is Generated (label 1) throughout; percentages, not fractions.

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

inline constexpr double kDefaultThreshold = 0.5;

// 100 * matches / n. Throws on empty input or length mismatch.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

// Mann-Whitney AUC over average ranks, x100. Ties between a positive and a
// negative count one half. Throws Error(kUndefined) when either class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Predict Generated iff score >= threshold.
ConfusionCounts confusion_at_threshold(std::span<const double> scores, std::span<const int> labels,
                                       double threshold = kDefaultThreshold);

struct CategoryRates {
  ConfusionCounts counts;
  std::optional<double> fn_pct;  // undefined without generated members
  std::optional<double> fp_pct;  // undefined without real members
};

struct CategoryErrorReport {
  std::map<std::string, CategoryRates> buckets;
  ConfusionCounts global;
  double threshold = kDefaultThreshold;
};

CategoryErrorReport category_error_rates(std::span<const double> scores,
                                         std::span<const int> labels,
                                         std::span<const std::string> categories,
                                         double threshold = kDefaultThreshold);

// Throws Error(kUndefined) when n < 2 or either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct CellMetadata {
  std::string model = "MLP-Base";
  std::string dataset;
  std::string mode;
  std::string features;
  std::string train_generator;
  std::string test_generator;
  std::uint64_t seed = 0;
  std::string manifest_sha256;
  std::string features_sha256;

  bool operator==(const CellMetadata&) const = default;
};

struct EvalReport {
  double accuracy = 0;
  double auc = 0;
  ConfusionCounts confusion;
  std::uint64_t n = 0;
  CellMetadata cell;

  bool operator==(const EvalReport&) const = default;
};

// Scores in (0,1), labels in {0,1}.
EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    CellMetadata cell, double threshold = kDefaultThreshold);

nlohmann::ordered_json to_json(const ConfusionCounts& c);
nlohmann::ordered_json to_json(const EvalReport& r);
nlohmann::ordered_json to_json(const CategoryErrorReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
CategoryErrorReport category_report_from_json(const nlohmann::json& j);

}  // namespace diffdetect::metrics
