#include "embedding/store.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "common/error.hpp"
#include "common/io.hpp"

namespace diffdetect::embedding {

namespace {

constexpr char kMagic[4] = {'D', 'E', 'M', 'B'};
constexpr std::uint16_t kTextPresent = 0x1;

void check_record(const EmbeddingStore& store, const EmbeddingRecord& r) {
  if (r.sample_id.size() > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorCode::kInvalidArgument, "sample id too long for store: " + r.sample_id);
  }
  if (r.image_vec.size() != store.image_dim) {
    fail(ErrorCode::kDimensionMismatch, "record " + r.sample_id + ": image vector length " +
                                            std::to_string(r.image_vec.size()) + " != " +
                                            std::to_string(store.image_dim));
  }
  if (store.has_text() != r.text_vec.has_value() ||
      (r.text_vec && r.text_vec->size() != store.text_dim)) {
    fail(ErrorCode::kDimensionMismatch, "record " + r.sample_id + ": text vector does not match store");
  }
  for (float x : r.image_vec) {
    if (!std::isfinite(x)) fail(ErrorCode::kValidation, "record " + r.sample_id + ": non-finite value");
  }
  if (r.text_vec) {
    for (float x : *r.text_vec) {
      if (!std::isfinite(x)) fail(ErrorCode::kValidation, "record " + r.sample_id + ": non-finite value");
    }
  }
}

}  // namespace

std::string_view to_string(FeatureMode mode) {
  return mode == FeatureMode::kImageOnly ? "image" : "image_text";
}

FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "image" || s == "image_only") return FeatureMode::kImageOnly;
  if (s == "image_text" || s == "image+text" || s == "text+image") return FeatureMode::kImageText;
  fail(ErrorCode::kInvalidArgument, "unknown feature mode \"" + std::string(s) + "\"");
}

std::unordered_map<std::string, std::size_t> EmbeddingStore::index() const {
  std::unordered_map<std::string, std::size_t> idx;
  idx.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) idx.emplace(records[i].sample_id, i);
  return idx;
}

std::string serialize_store(const EmbeddingStore& store) {
  if (store.image_dim == 0) {
    fail(ErrorCode::kInvalidArgument, "store image_dim must be positive");
  }
  io::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kStoreVersion);
  w.put<std::uint16_t>(store.has_text() ? kTextPresent : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.records.size()));
  w.put<std::uint32_t>(store.image_dim);
  w.put<std::uint32_t>(store.text_dim);
  for (const auto& r : store.records) {
    check_record(store, r);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.sample_id.size()));
    w.put_bytes(r.sample_id.data(), r.sample_id.size());
    w.put_floats(r.image_vec);
    if (r.text_vec) w.put_floats(*r.text_vec);
  }
  return w.bytes();
}

EmbeddingStore deserialize_store(std::string_view bytes) {
  io::ByteReader in(bytes, "embedding store");
  char magic[4];
  in.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::kFormat, "embedding store: bad magic");
  }
  const auto version = in.get<std::uint16_t>();
  if (version != kStoreVersion) {
    fail(ErrorCode::kFormat, "embedding store: unsupported version " + std::to_string(version));
  }
  const auto flags = in.get<std::uint16_t>();
  const auto count = in.get<std::uint32_t>();
  EmbeddingStore store;
  store.image_dim = in.get<std::uint32_t>();
  store.text_dim = in.get<std::uint32_t>();
  const bool text = (flags & kTextPresent) != 0;
  if (text != (store.text_dim > 0)) {
    fail(ErrorCode::kFormat, "embedding store: text flag disagrees with dim_txt");
  }
  store.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.sample_id = in.get_string(in.get<std::uint16_t>());
    r.image_vec.resize(store.image_dim);
    in.get_floats(r.image_vec);
    if (text) {
      r.text_vec.emplace(store.text_dim);
      in.get_floats(*r.text_vec);
    }
    store.records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    fail(ErrorCode::kFormat, "embedding store: trailing bytes");
  }
  return store;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_store(store));
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  return deserialize_store(io::read_file(path));
}

}  // namespace diffdetect::embedding
