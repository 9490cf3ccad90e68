#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "trainer/mlp.hpp"

namespace diffdetect::trainer {

// Binary, little-endian: "DMLP" | u16 version=1 | u32 config length |
// config JSON | per layer: weights f32 row-major, then biases f32.
inline constexpr std::uint16_t kCheckpointVersion = 1;

nlohmann::json config_to_json(const MlpConfig& config);
MlpConfig config_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const MlpModel& model);
MlpModel deserialize_checkpoint(std::string_view bytes);

// Written atomically (temp file + rename).
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace diffdetect::trainer
