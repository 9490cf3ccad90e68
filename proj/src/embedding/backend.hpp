#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus/manifest.hpp"
#include "embedding/bpe_tokenizer.hpp"
#include "embedding/image_preprocess.hpp"
#include "embedding/profile.hpp"

namespace diffdetect::embedding {

enum class Modality { kImage, kText };

std::string_view to_string(Modality m);

// Turns encoder inputs into feature vectors. Instances are not required to be
// thread-safe; extraction gives each worker its own backend.
class EmbeddingBackend {
 public:
  explicit EmbeddingBackend(BackboneProfile profile,
                            std::shared_ptr<const BpeTokenizer> tokenizer = nullptr);
  virtual ~EmbeddingBackend() = default;

  EmbeddingBackend(const EmbeddingBackend&) = delete;
  EmbeddingBackend& operator=(const EmbeddingBackend&) = delete;

  const BackboneProfile& profile() const { return profile_; }

  // Throws Error(kDimensionMismatch) if the tensor does not have the
  // profile's resolution or the encoder output is not image_dim long.
  std::vector<float> embed_image(const ImageTensor& tensor);
  std::vector<float> embed_text(const TokenSequence& tokens);

  // Full per-record path: decode + preprocess + embed_image, or tokenize +
  // embed_text. Keyed backends override this to skip the inputs entirely.
  virtual std::vector<float> embed_record(const corpus::SampleRecord& record, Modality modality,
                                          const std::filesystem::path& image_root);

 protected:
  virtual std::vector<float> run_image(const ImageTensor& tensor) = 0;
  virtual std::vector<float> run_text(const TokenSequence& tokens) = 0;

  const BpeTokenizer& tokenizer() const;

 private:
  BackboneProfile profile_;
  std::shared_ptr<const BpeTokenizer> tokenizer_;
};

// v <- v / ||v||; a zero vector is returned unchanged.
void l2_normalize(std::span<float> v);

// [image | text]; text may be empty.
std::vector<float> fuse(std::span<const float> image_vec, std::span<const float> text_vec);

struct PlantedBias {
  // Applies to every generated sample when unset.
  std::optional<corpus::Generator> generator;
  int direction = 0;
  float magnitude = 0.0f;
};

struct StubOptions {
  std::uint64_t seed = 0;
  std::vector<PlantedBias> biases;
  // Keyed mode embeds by record id without touching image files; content
  // mode decodes the image and hashes the preprocessed tensor.
  bool keyed_on_id = true;
};

// Seeded unit-norm vector for (id, modality, seed). For generated samples a
// matching planted bias adds `magnitude` to coordinate `direction`, then the
// vector is re-normalised.
std::vector<float> embed_stub(const corpus::SampleRecord& sample, Modality modality,
                              std::uint64_t seed, int dim,
                              std::span<const PlantedBias> biases = {});

// Same generator without the bias step, exposed for tests.
std::vector<float> stub_base_vector(std::string_view key, int dim);

class StubBackend final : public EmbeddingBackend {
 public:
  StubBackend(BackboneProfile profile, StubOptions options,
              std::shared_ptr<const BpeTokenizer> tokenizer = nullptr);

  std::vector<float> embed_record(const corpus::SampleRecord& record, Modality modality,
                                  const std::filesystem::path& image_root) override;

 protected:
  std::vector<float> run_image(const ImageTensor& tensor) override;
  std::vector<float> run_text(const TokenSequence& tokens) override;

 private:
  StubOptions options_;
};

// Runs ONNX graphs through OpenCV's DNN module. Graph contract:
//   "pixel_values" f32 [N,3,R,R] -> "image_embeds" f32 [N,image_dim]
//   "input_ids"    i64 [N,L]     -> "text_embeds"  f32 [N,text_dim]
class OnnxBackend final : public EmbeddingBackend {
 public:
  // Either model path may be empty if that modality is never requested.
  explicit OnnxBackend(BackboneProfile profile,
                       std::shared_ptr<const BpeTokenizer> tokenizer = nullptr);
  ~OnnxBackend() override;

 protected:
  std::vector<float> run_image(const ImageTensor& tensor) override;
  std::vector<float> run_text(const TokenSequence& tokens) override;

 private:
  struct Nets;
  std::unique_ptr<Nets> nets_;
};

}  // namespace diffdetect::embedding
