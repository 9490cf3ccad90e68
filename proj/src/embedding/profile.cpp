#include "embedding/profile.hpp"

#include <json.hpp>

#include <cstdlib>

#include "common/error.hpp"
#include "common/io.hpp"

#ifndef DIFFDETECT_DATA_DIR
#define DIFFDETECT_DATA_DIR "data"
#endif

namespace diffdetect::embedding {

void BackboneProfile::validate() const {
  if (image_dim <= 0 || text_dim <= 0) {
    fail(ErrorCode::kInvalidArgument, "profile " + name + ": dimensions must be positive");
  }
  if (input_resolution <= 0) {
    fail(ErrorCode::kInvalidArgument, "profile " + name + ": input_resolution must be positive");
  }
  if (context_length < 2) {
    fail(ErrorCode::kInvalidArgument, "profile " + name + ": context_length must be >= 2");
  }
  for (float s : channel_std) {
    if (!(s > 0.0f)) {
      fail(ErrorCode::kInvalidArgument, "profile " + name + ": channel_std must be positive");
    }
  }
}

std::filesystem::path default_data_dir() {
  return std::filesystem::path(DIFFDETECT_DATA_DIR);
}

BackboneProfile builtin_profile(std::string_view name) {
  BackboneProfile p;
  p.name = std::string(name);
  p.input_resolution = 224;
  p.context_length = 77;
  p.channel_mean = kClipMean;
  p.channel_std = kClipStd;
  p.vocab_path = default_data_dir() / "clip" / "vocab.json";
  p.merges_path = default_data_dir() / "clip" / "merges.txt";
  if (name == "clip-vit" || name == "stub") {
    p.image_dim = 512;
    p.text_dim = 512;
  } else if (name == "clip-rn50") {
    p.image_dim = 1024;
    p.text_dim = 1024;
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown backbone \"" + std::string(name) + "\"");
  }
  return p;
}

BackboneProfile load_profile(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : dir / fp;
  };
  try {
    BackboneProfile p = builtin_profile(j.value("base", std::string("clip-vit")));
    p.name = j.value("name", path.stem().string());
    p.image_dim = j.value("image_dim", p.image_dim);
    p.text_dim = j.value("text_dim", p.text_dim);
    p.input_resolution = j.value("input_resolution", p.input_resolution);
    p.context_length = j.value("context_length", p.context_length);
    if (j.contains("channel_mean")) p.channel_mean = j["channel_mean"].get<std::array<float, 3>>();
    if (j.contains("channel_std")) p.channel_std = j["channel_std"].get<std::array<float, 3>>();
    if (j.contains("vocab_path")) p.vocab_path = resolve(j["vocab_path"].get<std::string>());
    if (j.contains("merges_path")) p.merges_path = resolve(j["merges_path"].get<std::string>());
    if (j.contains("image_model_path")) {
      p.image_model_path = resolve(j["image_model_path"].get<std::string>());
    }
    if (j.contains("text_model_path")) {
      p.text_model_path = resolve(j["text_model_path"].get<std::string>());
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

BackboneProfile resolve_profile(std::string_view name_or_path) {
  if (name_or_path == "clip-vit" || name_or_path == "clip-rn50" || name_or_path == "stub") {
    return builtin_profile(name_or_path);
  }
  const std::filesystem::path path(name_or_path);
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kInvalidArgument, "unknown backbone \"" + std::string(name_or_path) +
                                          "\": not a builtin (clip-vit, clip-rn50, stub) and no such profile file");
  }
  return load_profile(path);
}

}  // namespace diffdetect::embedding
