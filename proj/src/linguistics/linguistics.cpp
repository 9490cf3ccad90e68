#include "linguistics/linguistics.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "common/io.hpp"
#include "metrics/metrics.hpp"

namespace diffdetect::linguistics {

namespace {

constexpr std::size_t kLength = 0;
constexpr std::size_t kFirstPos = 1;
constexpr std::size_t kStops = 19;
constexpr std::size_t kNonAlpha = 20;
constexpr std::size_t kEntities = 21;

std::size_t pos_index(std::string_view tag) {
  const auto it = std::find(kPosTags.begin(), kPosTags.end(), tag);
  return it == kPosTags.end() ? kPosTags.size() : static_cast<std::size_t>(it - kPosTags.begin());
}

std::int64_t code_point_count(std::string_view s) {
  std::int64_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace

std::size_t feature_index(std::string_view name) {
  const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
  if (it == kFeatureNames.end()) {
    fail(ErrorCode::kInvalidArgument, "unknown linguistic feature \"" + std::string(name) + "\"");
  }
  return static_cast<std::size_t>(it - kFeatureNames.begin());
}

std::map<std::string, CaptionAnnotation> parse_annotations_text(std::string_view text) {
  std::map<std::string, CaptionAnnotation> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "annotations line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, where + ": malformed JSON (" + e.what() + ")");
    }
    // A header line describing the annotator pipeline carries no "id".
    if (j.is_object() && !j.contains("id") && j.contains("pipeline")) continue;
    CaptionAnnotation a;
    std::string id;
    try {
      id = j.at("id").get<std::string>();
      a.caption = j.at("caption").get<std::string>();
      a.n_entities = j.at("n_entities").get<std::int64_t>();
      for (const auto& t : j.at("tokens")) {
        TokenAnnotation tok;
        tok.text = t.at("text").get<std::string>();
        tok.upos = t.at("upos").get<std::string>();
        tok.is_stop = t.at("is_stop").get<bool>();
        tok.is_alpha = t.at("is_alpha").get<bool>();
        tok.is_space = t.at("is_space").get<bool>();
        if (pos_index(tok.upos) == kPosTags.size()) {
          fail(ErrorCode::kParse, where + ": unknown upos tag \"" + tok.upos + "\"");
        }
        a.tokens.push_back(std::move(tok));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, where + ": " + e.what());
    }
    if (a.n_entities < 0) fail(ErrorCode::kParse, where + ": negative n_entities");
    if (!out.emplace(id, std::move(a)).second) {
      fail(ErrorCode::kParse, where + ": duplicate id \"" + id + "\"");
    }
  }
  return out;
}

std::map<std::string, CaptionAnnotation> parse_annotations(const std::filesystem::path& path) {
  return parse_annotations_text(io::read_file(path));
}

std::int64_t LinguisticProfile::pos_total() const {
  std::int64_t n = 0;
  for (std::size_t k = 0; k < kPosTags.size(); ++k) n += values[kFirstPos + k];
  return n;
}

LinguisticProfile profile(std::string_view caption, const std::vector<TokenAnnotation>& tokens,
                          std::int64_t n_entities) {
  LinguisticProfile p;
  p.values[kLength] = code_point_count(caption);
  for (const auto& t : tokens) {
    const std::size_t k = pos_index(t.upos);
    if (k == kPosTags.size()) {
      fail(ErrorCode::kInvalidArgument, "unknown upos tag \"" + t.upos + "\"");
    }
    ++p.values[kFirstPos + k];
    if (t.is_stop) ++p.values[kStops];
    if (!t.is_alpha) ++p.values[kNonAlpha];
  }
  p.values[kEntities] = n_entities;
  return p;
}

CorrelationReport correlation_report(const std::map<std::string, LinguisticProfile>& profiles,
                                     const std::map<std::string, int>& outcomes) {
  std::vector<const LinguisticProfile*> rows;
  std::vector<double> y;
  for (const auto& [id, outcome] : outcomes) {
    const auto it = profiles.find(id);
    if (it == profiles.end()) continue;
    rows.push_back(&it->second);
    y.push_back(outcome != 0 ? 1.0 : 0.0);
  }
  if (rows.empty()) {
    fail(ErrorCode::kValidation, "correlation_report: no ids shared by profiles and outcomes");
  }
  CorrelationReport report;
  report.n = rows.size();
  std::vector<double> x(rows.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    for (std::size_t i = 0; i < rows.size(); ++i) x[i] = static_cast<double>(rows[i]->values[f]);
    const std::string name(kFeatureNames[f]);
    try {
      report.features[name] = metrics::pearson(x, y);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined) throw;
      report.undefined.push_back(name);
    }
  }
  return report;
}

nlohmann::ordered_json to_json(const CorrelationReport& report) {
  nlohmann::ordered_json features = nlohmann::ordered_json::object();
  for (auto name : kFeatureNames) {
    const auto it = report.features.find(std::string(name));
    if (it != report.features.end()) features[it->first] = it->second;
  }
  return {{"model", report.model},
          {"generator", report.generator},
          {"dataset", report.dataset},
          {"features", features},
          {"undefined", report.undefined},
          {"n", report.n}};
}

CorrelationReport correlation_report_from_json(const nlohmann::json& j) {
  try {
    CorrelationReport r;
    r.model = j.value("model", std::string());
    r.generator = j.value("generator", std::string());
    r.dataset = j.value("dataset", std::string());
    for (const auto& [name, value] : j.at("features").items()) {
      feature_index(name);
      r.features[name] = value.get<double>();
    }
    r.undefined = j.value("undefined", std::vector<std::string>{});
    r.n = j.value("n", std::size_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("correlation report: ") + e.what());
  }
}

}  // namespace diffdetect::linguistics
