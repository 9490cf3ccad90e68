#include "trainer/checkpoint.hpp"

#include <cstring>
#include <limits>

#include "common/error.hpp"
#include "common/io.hpp"

namespace diffdetect::trainer {

namespace {
constexpr char kMagic[4] = {'D', 'M', 'L', 'P'};
}

nlohmann::json config_to_json(const MlpConfig& c) {
  return {
      {"input_dim", c.input_dim},
      {"hidden_dims", c.hidden_dims},
      {"lr_start", c.lr_start},
      {"lr_end", c.lr_end},
      {"max_epochs", c.max_epochs},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"early_stop_patience", c.early_stop_patience},
      {"l2_normalize", c.l2_normalize},
      {"feature_mode", std::string(embedding::to_string(c.feature_mode))},
  };
}

MlpConfig config_from_json(const nlohmann::json& j) {
  MlpConfig c;
  try {
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    c.lr_start = j.at("lr_start").get<double>();
    c.lr_end = j.at("lr_end").get<double>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<int>();
    c.l2_normalize = j.value("l2_normalize", false);
    c.feature_mode = embedding::parse_feature_mode(j.value("feature_mode", std::string("image")));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string serialize_checkpoint(const MlpModel& model) {
  const std::string config = config_to_json(model.config).dump();
  io::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.put_bytes(config.data(), config.size());
  for (const auto& layer : model.layers) {
    w.put_floats({layer.weight.data(), static_cast<std::size_t>(layer.weight.size())});
    w.put_floats({layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
  }
  return w.bytes();
}

MlpModel deserialize_checkpoint(std::string_view bytes) {
  io::ByteReader in(bytes, "checkpoint");
  char magic[4];
  in.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::kFormat, "checkpoint: bad magic");
  }
  const auto version = in.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kFormat, "checkpoint: unsupported version " + std::to_string(version));
  }
  const std::string config_text = in.get_string(in.get<std::uint32_t>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint config: ") + e.what());
  }
  MlpModel model;
  model.config = config_from_json(j);

  std::vector<std::size_t> widths = model.config.hidden_dims;
  widths.push_back(1);
  std::size_t fan_in = model.config.input_dim;
  for (auto fan_out : widths) {
    Layer<float> layer;
    layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    layer.bias.resize(static_cast<Eigen::Index>(fan_out));
    in.get_floats({layer.weight.data(), static_cast<std::size_t>(layer.weight.size())});
    in.get_floats({layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      fail(ErrorCode::kFormat, "checkpoint: non-finite parameter");
    }
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  if (in.remaining() != 0) {
    fail(ErrorCode::kFormat, "checkpoint: trailing bytes");
  }
  return model;
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(model));
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace diffdetect::trainer
