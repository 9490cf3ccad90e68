#include "embedding/backend.hpp"

#include <cmath>
#include <cstring>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/random.hpp"

namespace diffdetect::embedding {

namespace {

std::uint64_t key_seed(std::string_view key) {
  const std::string digest = io::sha256_hex(key);
  return std::stoull(digest.substr(0, 16), nullptr, 16);
}

std::string stub_key(std::string_view id, Modality modality, std::uint64_t seed) {
  // Unit separators keep ("ab","c") and ("a","bc") apart.
  std::string key(id);
  key += '\x1f';
  key += to_string(modality);
  key += '\x1f';
  key += std::to_string(seed);
  return key;
}

bool bias_applies(const PlantedBias& bias, const corpus::SampleRecord& sample) {
  return sample.label == corpus::Label::kGenerated &&
         (!bias.generator || *bias.generator == sample.generator);
}

}  // namespace

std::vector<float> stub_base_vector(std::string_view key, int dim) {
  rng::Engine gen(key_seed(key));
  std::vector<double> v(static_cast<std::size_t>(dim));
  double sq = 0.0;
  for (auto& x : v) {
    x = rng::normal(gen);
    sq += x * x;
  }
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

std::vector<float> embed_stub(const corpus::SampleRecord& sample, Modality modality,
                              std::uint64_t seed, int dim, std::span<const PlantedBias> biases) {
  auto v = stub_base_vector(stub_key(sample.id, modality, seed), dim);
  bool biased = false;
  for (const auto& bias : biases) {
    if (!bias_applies(bias, sample)) continue;
    if (bias.direction < 0 || bias.direction >= dim) {
      fail(ErrorCode::kInvalidArgument, "planted bias direction " +
                                            std::to_string(bias.direction) + " outside [0, " +
                                            std::to_string(dim) + ")");
    }
    v[static_cast<std::size_t>(bias.direction)] += bias.magnitude;
    biased = true;
  }
  if (biased) l2_normalize(v);
  return v;
}

StubBackend::StubBackend(BackboneProfile profile, StubOptions options,
                         std::shared_ptr<const BpeTokenizer> tokenizer)
    : EmbeddingBackend(std::move(profile), std::move(tokenizer)), options_(std::move(options)) {}

std::vector<float> StubBackend::embed_record(const corpus::SampleRecord& record,
                                             Modality modality,
                                             const std::filesystem::path& image_root) {
  if (!options_.keyed_on_id) {
    // Content mode still honours planted biases so fixtures stay separable.
    auto v = EmbeddingBackend::embed_record(record, modality, image_root);
    bool biased = false;
    for (const auto& bias : options_.biases) {
      if (!bias_applies(bias, record)) continue;
      v.at(static_cast<std::size_t>(bias.direction)) += bias.magnitude;
      biased = true;
    }
    if (biased) l2_normalize(v);
    return v;
  }
  const int dim = modality == Modality::kImage ? profile().image_dim : profile().text_dim;
  return embed_stub(record, modality, options_.seed, dim, options_.biases);
}

std::vector<float> StubBackend::run_image(const ImageTensor& tensor) {
  std::string key(reinterpret_cast<const char*>(tensor.data.data()),
                  tensor.data.size() * sizeof(float));
  key += '\x1f';
  key += std::to_string(options_.seed);
  return stub_base_vector(key, profile().image_dim);
}

std::vector<float> StubBackend::run_text(const TokenSequence& tokens) {
  std::string key(reinterpret_cast<const char*>(tokens.ids.data()),
                  tokens.ids.size() * sizeof(std::int32_t));
  key += '\x1e';
  key += std::to_string(options_.seed);
  return stub_base_vector(key, profile().text_dim);
}

}  // namespace diffdetect::embedding
