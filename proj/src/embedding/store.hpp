#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace diffdetect::embedding {

enum class FeatureMode { kImageOnly, kImageText };

std::string_view to_string(FeatureMode mode);
// Accepts "image"/"image_only" and "image_text"/"image+text".
FeatureMode parse_feature_mode(std::string_view s);

struct EmbeddingRecord {
  std::string sample_id;
  std::vector<float> image_vec;
  std::optional<std::vector<float>> text_vec;

  bool operator==(const EmbeddingRecord&) const = default;
};

// In-memory form of the DEMB file:
//   "DEMB" | u16 version=1 | u16 flags (bit0: text present) | u32 count |
//   u32 dim_img | u32 dim_txt | records: u16 id_len, id bytes,
//   f32[dim_img], f32[dim_txt] if bit0. Little-endian throughout.
struct EmbeddingStore {
  std::uint32_t image_dim = 0;
  std::uint32_t text_dim = 0;  // 0 when text vectors are absent
  std::vector<EmbeddingRecord> records;

  bool has_text() const { return text_dim > 0; }
  FeatureMode mode() const { return has_text() ? FeatureMode::kImageText : FeatureMode::kImageOnly; }

  // sample_id -> position in records.
  std::unordered_map<std::string, std::size_t> index() const;

  bool operator==(const EmbeddingStore&) const = default;
};

inline constexpr std::uint16_t kStoreVersion = 1;

std::string serialize_store(const EmbeddingStore& store);
EmbeddingStore deserialize_store(std::string_view bytes);

void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);

}  // namespace diffdetect::embedding
