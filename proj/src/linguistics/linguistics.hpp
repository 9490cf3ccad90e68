#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace diffdetect::linguistics {

// Universal POS inventory, in the order the profile stores them.
inline constexpr std::array<std::string_view, 18> kPosTags = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X", "SPACE"};

// Caption features: LENGTH, the 18 POS counts, STOPS, NON_ALPHA, NAMED_ENTITIES.
inline constexpr std::size_t kFeatureCount = 22;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "LENGTH", "ADJ",   "ADP",   "ADV",   "AUX",   "CCONJ", "DET",       "INTJ",
    "NOUN",   "NUM",   "PART",  "PRON",  "PROPN", "PUNCT", "SCONJ",     "SYM",
    "VERB",   "X",     "SPACE", "STOPS", "NON_ALPHA", "NAMED_ENTITIES"};

// Index of a feature name in kFeatureNames; throws on unknown names.
std::size_t feature_index(std::string_view name);

struct TokenAnnotation {
  std::string text;
  std::string upos;
  bool is_stop = false;
  bool is_alpha = false;
  bool is_space = false;
};

struct CaptionAnnotation {
  std::string caption;
  std::vector<TokenAnnotation> tokens;
  std::int64_t n_entities = 0;
};

// id -> annotation. Throws Error(kParse) on malformed lines and unknown upos
// tags, naming the line.
std::map<std::string, CaptionAnnotation> parse_annotations(const std::filesystem::path& path);
std::map<std::string, CaptionAnnotation> parse_annotations_text(std::string_view text);

struct LinguisticProfile {
  std::array<std::int64_t, kFeatureCount> values{};

  std::int64_t operator[](std::string_view feature) const { return values[feature_index(feature)]; }
  std::int64_t pos_total() const;
  bool operator==(const LinguisticProfile&) const = default;
};

// LENGTH counts Unicode code points of the caption.
LinguisticProfile profile(std::string_view caption, const std::vector<TokenAnnotation>& tokens,
                          std::int64_t n_entities);

enum class CorrelationTarget {
  kCorrectness,  // 1 when the classifier was right
  kPrediction,   // 1 when the classifier said "generated"
};

struct CorrelationReport {
  std::string model;
  std::string generator;
  std::string dataset;
  std::map<std::string, double> features;  // defined coefficients only
  std::vector<std::string> undefined;      // zero-variance features, in feature order
  std::size_t n = 0;
};

// Pearson r between each feature and the 0/1 outcome over the ids present in
// both maps. Ids are visited in sorted order, so the result does not depend
// on insertion order. Throws Error(kValidation) on an empty intersection.
CorrelationReport correlation_report(const std::map<std::string, LinguisticProfile>& profiles,
                                     const std::map<std::string, int>& outcomes);

nlohmann::ordered_json to_json(const CorrelationReport& report);
CorrelationReport correlation_report_from_json(const nlohmann::json& j);

}  // namespace diffdetect::linguistics
