#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace diffdetect::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + ": length mismatch (" +
                                            std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) {
    fail(ErrorCode::kInvalidArgument, std::string(what) + ": empty input");
  }
}

std::optional<double> pct(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ConfusionCounts counts_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
          j.at("tn").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size(), "accuracy");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    matches += (predictions[i] != 0) == (labels[i] != 0) ? 1 : 0;
  }
  return 100.0 * static_cast<double>(matches) / static_cast<double>(labels.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the average rank keeps tied ranks integral: a tie block occupying
  // sorted positions [lo, hi) has average 1-based rank (lo + hi + 1) / 2.
  std::uint64_t positives = 0;
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const std::uint64_t rank_x2 = lo + hi + 1;
    for (std::size_t k = lo; k < hi; ++k) {
      if (labels[order[k]] != 0) {
        ++positives;
        rank_sum_x2 += rank_x2;
      }
    }
    lo = hi;
  }
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    fail(ErrorCode::kUndefined, "roc_auc: both classes are required");
  }
  // 2U = sum(2 * rank) - n1 (n1 + 1); AUC = U / (n1 n0).
  const std::uint64_t u_x2 = rank_sum_x2 - positives * (positives + 1);
  return 100.0 * static_cast<double>(u_x2) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

ConfusionCounts confusion_at_threshold(std::span<const double> scores, std::span<const int> labels,
                                       double threshold) {
  check_lengths(scores.size(), labels.size(), "confusion_at_threshold");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

CategoryErrorReport category_error_rates(std::span<const double> scores,
                                         std::span<const int> labels,
                                         std::span<const std::string> categories,
                                         double threshold) {
  check_lengths(scores.size(), labels.size(), "category_error_rates");
  check_lengths(scores.size(), categories.size(), "category_error_rates");
  CategoryErrorReport report;
  report.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto c = confusion_at_threshold(scores.subspan(i, 1), labels.subspan(i, 1), threshold);
    report.buckets[categories[i]].counts += c;
    report.global += c;
  }
  for (auto& [name, rates] : report.buckets) {
    const auto& c = rates.counts;
    rates.fn_pct = pct(c.fn, c.fn + c.tp);
    rates.fp_pct = pct(c.fp, c.fp + c.tn);
  }
  return report;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_lengths(x.size(), y.size(), "pearson");
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCode::kUndefined, "pearson: need at least two samples");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail(ErrorCode::kUndefined, "pearson: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    CellMetadata cell, double threshold) {
  EvalReport r;
  r.confusion = confusion_at_threshold(scores, labels, threshold);
  r.n = r.confusion.total();
  r.accuracy = 100.0 * static_cast<double>(r.confusion.tp + r.confusion.tn) / static_cast<double>(r.n);
  r.auc = roc_auc(scores, labels);
  r.cell = std::move(cell);
  return r;
}

nlohmann::ordered_json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.cell.model;
  j["dataset"] = r.cell.dataset;
  j["mode"] = r.cell.mode;
  j["features"] = r.cell.features;
  j["train_generator"] = r.cell.train_generator;
  j["test_generator"] = r.cell.test_generator;
  j["seed"] = r.cell.seed;
  j["accuracy"] = r.accuracy;
  j["auc"] = r.auc;
  j["n"] = r.n;
  j["confusion"] = to_json(r.confusion);
  j["manifest_sha256"] = r.cell.manifest_sha256;
  j["features_sha256"] = r.cell.features_sha256;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.cell.model = j.at("model").get<std::string>();
    r.cell.dataset = j.at("dataset").get<std::string>();
    r.cell.mode = j.at("mode").get<std::string>();
    r.cell.features = j.at("features").get<std::string>();
    r.cell.train_generator = j.value("train_generator", std::string());
    r.cell.test_generator = j.value("test_generator", std::string());
    r.cell.seed = j.value("seed", std::uint64_t{0});
    r.accuracy = j.at("accuracy").get<double>();
    r.auc = j.at("auc").get<double>();
    r.n = j.value("n", std::uint64_t{0});
    if (j.contains("confusion")) r.confusion = counts_from_json(j.at("confusion"));
    r.cell.manifest_sha256 = j.value("manifest_sha256", std::string());
    r.cell.features_sha256 = j.value("features_sha256", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("eval report: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const CategoryErrorReport& r) {
  nlohmann::ordered_json buckets = nlohmann::ordered_json::object();
  for (const auto& [name, rates] : r.buckets) {
    buckets[name] = {{"fn_pct", optional_json(rates.fn_pct)},
                     {"fp_pct", optional_json(rates.fp_pct)},
                     {"counts", to_json(rates.counts)}};
  }
  return {{"threshold", r.threshold}, {"global", to_json(r.global)}, {"buckets", buckets}};
}

CategoryErrorReport category_report_from_json(const nlohmann::json& j) {
  try {
    CategoryErrorReport r;
    r.threshold = j.value("threshold", kDefaultThreshold);
    r.global = counts_from_json(j.at("global"));
    for (const auto& [name, b] : j.at("buckets").items()) {
      CategoryRates rates;
      rates.counts = counts_from_json(b.at("counts"));
      rates.fn_pct = optional_from_json(b.at("fn_pct"));
      rates.fp_pct = optional_from_json(b.at("fp_pct"));
      r.buckets.emplace(name, rates);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("category report: ") + e.what());
  }
}

}  // namespace diffdetect::metrics
