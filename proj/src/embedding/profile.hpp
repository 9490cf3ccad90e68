#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

namespace diffdetect::embedding {

// Encoder geometry and tokenizer data for one backbone.
struct BackboneProfile {
  std::string name;
  int image_dim = 0;
  int text_dim = 0;
  int input_resolution = 224;
  std::array<float, 3> channel_mean{};
  std::array<float, 3> channel_std{};
  int context_length = 77;
  std::filesystem::path vocab_path;
  std::filesystem::path merges_path;
  // ONNX graphs; only consulted by the ONNX backend.
  std::filesystem::path image_model_path;
  std::filesystem::path text_model_path;

  void validate() const;
};

// CLIP normalisation constants.
inline constexpr std::array<float, 3> kClipMean = {0.48145466f, 0.4578275f, 0.40821073f};
inline constexpr std::array<float, 3> kClipStd = {0.26862954f, 0.26130258f, 0.27577711f};

// Directory holding the bundled vocab.json / merges.txt.
std::filesystem::path default_data_dir();

// "clip-vit" (512/512), "clip-rn50" (1024/1024) or "stub" (512/512).
BackboneProfile builtin_profile(std::string_view name);

// JSON object with the BackboneProfile field names; relative paths resolve
// against the file's directory. Missing fields fall back to the builtin
// profile named by "base" (default "clip-vit").
BackboneProfile load_profile(const std::filesystem::path& path);

// A builtin name or a path to a profile JSON file.
BackboneProfile resolve_profile(std::string_view name_or_path);

}  // namespace diffdetect::embedding
