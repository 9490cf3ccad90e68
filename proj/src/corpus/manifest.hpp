#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diffdetect::corpus {

enum class Label { kReal, kGenerated };
enum class Split { kTrain, kVal, kTest };
enum class MacroCategory { kAnimate, kInanimate, kUnknown };

// Closed set plus an open "other" bucket carrying the original name.
class Generator {
 public:
  enum class Kind { kNone, kStableDiffusion, kGlide, kOther };

  Generator() = default;
  static Generator none() { return Generator(Kind::kNone, {}); }
  static Generator stable_diffusion() { return Generator(Kind::kStableDiffusion, {}); }
  static Generator glide() { return Generator(Kind::kGlide, {}); }
  // "none", "stable_diffusion", "glide" map to the named kinds; any other
  // non-empty string becomes kOther.
  static Generator parse(std::string_view name);

  Kind kind() const { return kind_; }
  std::string name() const;
  bool operator==(const Generator&) const = default;

 private:
  Generator(Kind kind, std::string other) : kind_(kind), other_(std::move(other)) {}
  Kind kind_ = Kind::kNone;
  std::string other_;
};

class Dataset {
 public:
  enum class Kind { kMscoco, kWikimedia, kOther };

  Dataset() = default;
  static Dataset mscoco() { return Dataset(Kind::kMscoco, {}); }
  static Dataset wikimedia() { return Dataset(Kind::kWikimedia, {}); }
  static Dataset parse(std::string_view name);

  Kind kind() const { return kind_; }
  std::string name() const;
  bool operator==(const Dataset&) const = default;

 private:
  Dataset(Kind kind, std::string other) : kind_(kind), other_(std::move(other)) {}
  Kind kind_ = Kind::kMscoco;
  std::string other_;
};

std::string_view to_string(Label v);
std::string_view to_string(Split v);
std::string_view to_string(MacroCategory v);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);
MacroCategory parse_macro_category(std::string_view s);

struct SampleRecord {
  std::string id;
  std::string image_path;
  std::string caption;
  Label label = Label::kReal;
  Generator generator;
  Dataset dataset;
  std::optional<std::string> category;
  MacroCategory macro_category = MacroCategory::kUnknown;
  Split split = Split::kTrain;

  // Empty captions are legal but excluded from image+text training by default.
  bool degenerate() const { return caption.empty(); }

  bool operator==(const SampleRecord&) const = default;
};

struct Manifest {
  std::vector<SampleRecord> records;
  std::string source_note;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct ParseOptions {
  // Every generated caption must match some real caption.
  bool check_paired = false;
};

// Throws Error(kParse) for malformed lines (message carries "line N"),
// Error(kValidation) for invariant violations.
Manifest parse_manifest(const std::filesystem::path& path, const ParseOptions& options = {});
Manifest parse_manifest_text(std::string_view text, const ParseOptions& options = {});

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);

// Record-level invariants (label/generator, id uniqueness, non-empty path).
void validate(const Manifest& manifest, const ParseOptions& options = {});
void check_paired(const Manifest& manifest);

class SplitCounts {
 public:
  std::size_t at(Split split, Label label) const {
    return counts_[static_cast<int>(split)][static_cast<int>(label)];
  }
  std::size_t& at(Split split, Label label) {
    return counts_[static_cast<int>(split)][static_cast<int>(label)];
  }
  std::size_t total() const;

 private:
  std::array<std::array<std::size_t, 2>, 3> counts_{};
};

SplitCounts split_counts(const Manifest& manifest);

using RecordPredicate = std::function<bool(const SampleRecord&)>;

// Field-wise conjunction; unset fields match anything.
struct RecordFilter {
  std::optional<Split> split;
  std::optional<Label> label;
  std::optional<Generator> generator;
  std::optional<Dataset> dataset;
  std::optional<MacroCategory> macro_category;

  bool operator()(const SampleRecord& record) const;
};

Manifest filter(const Manifest& manifest, const RecordPredicate& predicate);

// Real records plus the generated records of one generator, restricted to a
// split. This is the evaluation population of a single table cell.
Manifest cell_population(const Manifest& manifest, Split split, const Generator& generator);

struct ProtocolOptions {
  std::size_t train_real = 6000;
  std::size_t val_real = 1500;
  std::size_t test_real = 6000;
  std::vector<Generator> generators = {Generator::stable_diffusion()};
  Dataset dataset = Dataset::mscoco();
  // Category/macro tags are assigned round-robin when true.
  bool with_categories = false;
};

// Builds a paired manifest shaped like the collection protocol: each real
// record gets one generated sibling per generator with the same caption and
// split. Image paths are placeholders under real/ and <generator>/.
Manifest make_protocol_manifest(const ProtocolOptions& options);

// Concatenates manifests in order and re-validates.
Manifest merge(const std::vector<Manifest>& parts, const ParseOptions& options = {});

}  // namespace diffdetect::corpus
