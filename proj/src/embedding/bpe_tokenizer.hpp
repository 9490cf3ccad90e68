#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace diffdetect::embedding {

struct TokenSequence {
  std::vector<std::int32_t> ids;  // length == context_length
  int effective_length = 0;
};

// Byte-level BPE over a CLIP-style vocabulary (vocab.json: token -> id,
// merges.txt: one "left right" pair per line, ranked by line order).
//
// Text is NFC-normalised, whitespace-collapsed and lowercased, then split
// with the CLIP pattern (contractions, letter runs, single digits, runs of
// everything else). Each piece is mapped byte-wise into the printable
// alphabet, suffixed with "</w>" and merged greedily by rank.
//
// Immutable after load; encode() is reentrant.
class BpeTokenizer {
 public:
  static BpeTokenizer load(const std::filesystem::path& vocab_path,
                           const std::filesystem::path& merges_path);

  // BPE ids without start/end markers.
  std::vector<std::int32_t> encode_ids(std::string_view text) const;

  // [SOT, ids..., EOT, 0...]; truncated so EOT always fits.
  TokenSequence encode(std::string_view text, int context_length) const;

  std::int32_t start_id() const { return start_id_; }
  std::int32_t end_id() const { return end_id_; }
  static constexpr std::int32_t pad_id() { return 0; }
  std::size_t vocab_size() const { return vocab_.size(); }

  // Lowercased, whitespace-normalised text prior to splitting. Exposed for tests.
  static std::string clean(std::string_view text);
  static std::vector<std::string> pre_tokenize(std::string_view cleaned);

 private:
  std::vector<std::string> bpe(const std::string& piece) const;

  std::unordered_map<std::string, std::int32_t> vocab_;
  std::unordered_map<std::string, std::int32_t> ranks_;  // "left right" -> rank
  std::array<std::string, 256> byte_symbols_;
  std::int32_t start_id_ = 0;
  std::int32_t end_id_ = 0;
};

}  // namespace diffdetect::embedding
