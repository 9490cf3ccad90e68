#include "corpus/manifest.hpp"

#include <json.hpp>

#include <algorithm>

#include <set>
#include <sstream>
#include <unordered_set>

#include "common/error.hpp"
#include "common/io.hpp"

namespace diffdetect::corpus {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 9> kFields = {
    "id", "image_path", "caption", "label", "generator",
    "dataset", "category", "macro_category", "split"};

const std::string& require_string(const ordered_json& obj, const char* key,
                                  std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    fail(ErrorCode::kParse,
         "line " + std::to_string(line) + ": missing field \"" + key + "\"");
  }
  if (!it->is_string()) {
    fail(ErrorCode::kParse,
         "line " + std::to_string(line) + ": field \"" + key + "\" must be a string");
  }
  return it->get_ref<const std::string&>();
}

SampleRecord record_from_json(const ordered_json& obj, std::size_t line) {
  if (!obj.is_object()) {
    fail(ErrorCode::kParse, "line " + std::to_string(line) + ": expected a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
      fail(ErrorCode::kParse,
           "line " + std::to_string(line) + ": unknown field \"" + key + "\"");
    }
  }
  SampleRecord r;
  try {
    r.id = require_string(obj, "id", line);
    r.image_path = require_string(obj, "image_path", line);
    r.caption = require_string(obj, "caption", line);
    r.label = parse_label(require_string(obj, "label", line));
    r.generator = Generator::parse(require_string(obj, "generator", line));
    r.dataset = Dataset::parse(require_string(obj, "dataset", line));
    const auto cat = obj.find("category");
    if (cat == obj.end()) {
      fail(ErrorCode::kParse, "missing field \"category\"");
    }
    if (cat->is_string()) {
      r.category = cat->get<std::string>();
    } else if (!cat->is_null()) {
      fail(ErrorCode::kParse, "field \"category\" must be a string or null");
    }
    r.macro_category = parse_macro_category(require_string(obj, "macro_category", line));
    r.split = parse_split(require_string(obj, "split", line));
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind("line ", 0) == 0) {
      throw;
    }
    fail(e.code(), "line " + std::to_string(line) + ": " + msg);
  }
  if (r.image_path.empty()) {
    fail(ErrorCode::kValidation, "line " + std::to_string(line) + ": empty image_path");
  }
  if ((r.label == Label::kReal) != (r.generator.kind() == Generator::Kind::kNone)) {
    fail(ErrorCode::kValidation, "line " + std::to_string(line) +
                                     ": label/generator inconsistency (label=" +
                                     std::string(to_string(r.label)) +
                                     ", generator=" + r.generator.name() + ")");
  }
  return r;
}

ordered_json record_to_json(const SampleRecord& r) {
  ordered_json obj;
  obj["id"] = r.id;
  obj["image_path"] = r.image_path;
  obj["caption"] = r.caption;
  obj["label"] = to_string(r.label);
  obj["generator"] = r.generator.name();
  obj["dataset"] = r.dataset.name();
  obj["category"] = r.category ? ordered_json(*r.category) : ordered_json(nullptr);
  obj["macro_category"] = to_string(r.macro_category);
  obj["split"] = to_string(r.split);
  return obj;
}

}  // namespace

Generator Generator::parse(std::string_view name) {
  if (name == "none") return none();
  if (name == "stable_diffusion") return stable_diffusion();
  if (name == "glide") return glide();
  if (name.empty()) {
    fail(ErrorCode::kValidation, "generator name must not be empty");
  }
  return Generator(Kind::kOther, std::string(name));
}

std::string Generator::name() const {
  switch (kind_) {
    case Kind::kNone: return "none";
    case Kind::kStableDiffusion: return "stable_diffusion";
    case Kind::kGlide: return "glide";
    case Kind::kOther: return other_;
  }
  return other_;
}

Dataset Dataset::parse(std::string_view name) {
  if (name == "mscoco") return mscoco();
  if (name == "wikimedia") return wikimedia();
  if (name.empty()) {
    fail(ErrorCode::kValidation, "dataset name must not be empty");
  }
  return Dataset(Kind::kOther, std::string(name));
}

std::string Dataset::name() const {
  switch (kind_) {
    case Kind::kMscoco: return "mscoco";
    case Kind::kWikimedia: return "wikimedia";
    case Kind::kOther: return other_;
  }
  return other_;
}

std::string_view to_string(Label v) {
  return v == Label::kReal ? "real" : "generated";
}

std::string_view to_string(Split v) {
  switch (v) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string_view to_string(MacroCategory v) {
  switch (v) {
    case MacroCategory::kAnimate: return "animate";
    case MacroCategory::kInanimate: return "inanimate";
    case MacroCategory::kUnknown: return "unknown";
  }
  return "unknown";
}

Label parse_label(std::string_view s) {
  if (s == "real") return Label::kReal;
  if (s == "generated") return Label::kGenerated;
  fail(ErrorCode::kParse, "unknown label \"" + std::string(s) + "\"");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  fail(ErrorCode::kParse, "unknown split \"" + std::string(s) + "\"");
}

MacroCategory parse_macro_category(std::string_view s) {
  if (s == "animate") return MacroCategory::kAnimate;
  if (s == "inanimate") return MacroCategory::kInanimate;
  if (s == "unknown") return MacroCategory::kUnknown;
  fail(ErrorCode::kParse, "unknown macro_category \"" + std::string(s) + "\"");
}

Manifest parse_manifest_text(std::string_view text, const ParseOptions& options) {
  Manifest m;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse,
           "line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    SampleRecord r = record_from_json(obj, line_no);
    if (!ids.insert(r.id).second) {
      fail(ErrorCode::kValidation,
           "line " + std::to_string(line_no) + ": duplicate id \"" + r.id + "\"");
    }
    m.records.push_back(std::move(r));
  }
  if (options.check_paired) {
    check_paired(m);
  }
  return m;
}

Manifest parse_manifest(const std::filesystem::path& path, const ParseOptions& options) {
  Manifest m = parse_manifest_text(io::read_file(path), options);
  m.source_note = path.string();
  return m;
}

std::string format_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  io::write_file_atomic(path, format_manifest(manifest));
}

void validate(const Manifest& manifest, const ParseOptions& options) {
  std::unordered_set<std::string> ids;
  for (const auto& r : manifest.records) {
    if (!ids.insert(r.id).second) {
      fail(ErrorCode::kValidation, "duplicate id \"" + r.id + "\"");
    }
    if (r.image_path.empty()) {
      fail(ErrorCode::kValidation, "record \"" + r.id + "\": empty image_path");
    }
    if ((r.label == Label::kReal) != (r.generator.kind() == Generator::Kind::kNone)) {
      fail(ErrorCode::kValidation, "record \"" + r.id + "\": label/generator inconsistency");
    }
  }
  if (options.check_paired) {
    check_paired(manifest);
  }
}

void check_paired(const Manifest& manifest) {
  std::unordered_set<std::string> real_captions;
  for (const auto& r : manifest.records) {
    if (r.label == Label::kReal) real_captions.insert(r.caption);
  }
  for (const auto& r : manifest.records) {
    if (r.label == Label::kGenerated && !real_captions.contains(r.caption)) {
      fail(ErrorCode::kValidation,
           "record \"" + r.id + "\": generated caption has no real counterpart");
    }
  }
}

std::size_t SplitCounts::total() const {
  std::size_t n = 0;
  for (const auto& row : counts_) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

SplitCounts split_counts(const Manifest& manifest) {
  SplitCounts counts;
  for (const auto& r : manifest.records) {
    ++counts.at(r.split, r.label);
  }
  return counts;
}

bool RecordFilter::operator()(const SampleRecord& r) const {
  return (!split || r.split == *split) && (!label || r.label == *label) &&
         (!generator || r.generator == *generator) &&
         (!dataset || r.dataset == *dataset) &&
         (!macro_category || r.macro_category == *macro_category);
}

Manifest filter(const Manifest& manifest, const RecordPredicate& predicate) {
  Manifest out;
  out.source_note = manifest.source_note;
  for (const auto& r : manifest.records) {
    if (predicate(r)) out.records.push_back(r);
  }
  return out;
}

Manifest cell_population(const Manifest& manifest, Split split, const Generator& generator) {
  return filter(manifest, [&](const SampleRecord& r) {
    return r.split == split && (r.label == Label::kReal || r.generator == generator);
  });
}

Manifest make_protocol_manifest(const ProtocolOptions& options) {
  struct Tag {
    const char* category;
    MacroCategory macro;
  };
  static constexpr std::array<Tag, 6> kTags = {{
      {"Animal", MacroCategory::kAnimate},
      {"River", MacroCategory::kInanimate},
      {"Artist", MacroCategory::kAnimate},
      {"Building", MacroCategory::kInanimate},
      {"Athlete", MacroCategory::kAnimate},
      {"Mountain", MacroCategory::kInanimate},
  }};

  Manifest m;
  m.source_note = "protocol manifest";
  const std::array<std::pair<Split, std::size_t>, 3> splits = {{
      {Split::kTrain, options.train_real},
      {Split::kVal, options.val_real},
      {Split::kTest, options.test_real},
  }};
  std::size_t serial = 0;
  for (const auto& [split, count] : splits) {
    for (std::size_t i = 0; i < count; ++i, ++serial) {
      SampleRecord real;
      std::ostringstream id;
      id << "real-" << to_string(split) << "-" << i;
      real.id = id.str();
      real.image_path = "real/" + real.id + ".png";
      real.caption = "caption " + std::to_string(serial);
      real.label = Label::kReal;
      real.generator = Generator::none();
      real.dataset = options.dataset;
      real.split = split;
      if (options.with_categories) {
        const auto& tag = kTags[serial % kTags.size()];
        real.category = tag.category;
        real.macro_category = tag.macro;
      }
      m.records.push_back(real);
      for (const auto& gen : options.generators) {
        SampleRecord g = real;
        g.id = gen.name() + "-" + std::string(to_string(split)) + "-" + std::to_string(i);
        g.image_path = gen.name() + "/" + g.id + ".png";
        g.label = Label::kGenerated;
        g.generator = gen;
        m.records.push_back(std::move(g));
      }
    }
  }
  return m;
}

Manifest merge(const std::vector<Manifest>& parts, const ParseOptions& options) {
  Manifest out;
  for (const auto& p : parts) {
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
    if (!p.source_note.empty()) {
      if (!out.source_note.empty()) out.source_note += "; ";
      out.source_note += p.source_note;
    }
  }
  validate(out, options);
  return out;
}

}  // namespace diffdetect::corpus
