#include "embedding/backend.hpp"

#include <cmath>

#include "common/error.hpp"

namespace diffdetect::embedding {

std::string_view to_string(Modality m) {
  return m == Modality::kImage ? "image" : "text";
}

EmbeddingBackend::EmbeddingBackend(BackboneProfile profile,
                                   std::shared_ptr<const BpeTokenizer> tokenizer)
    : profile_(std::move(profile)), tokenizer_(std::move(tokenizer)) {
  profile_.validate();
}

const BpeTokenizer& EmbeddingBackend::tokenizer() const {
  if (!tokenizer_) {
    fail(ErrorCode::kIo, "missing tokenizer data files for profile " + profile_.name);
  }
  return *tokenizer_;
}

namespace {

void check_output(const std::vector<float>& v, int expected, std::string_view what) {
  if (static_cast<int>(v.size()) != expected) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + " output has " +
                                            std::to_string(v.size()) + " components, profile says " +
                                            std::to_string(expected));
  }
  for (float x : v) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::kBackend, std::string(what) + " output is not finite");
    }
  }
}

}  // namespace

std::vector<float> EmbeddingBackend::embed_image(const ImageTensor& tensor) {
  const int r = profile_.input_resolution;
  if (tensor.resolution != r ||
      tensor.data.size() != static_cast<std::size_t>(3) * r * r) {
    fail(ErrorCode::kDimensionMismatch,
         "image tensor shape does not match [3," + std::to_string(r) + "," + std::to_string(r) + "]");
  }
  auto v = run_image(tensor);
  check_output(v, profile_.image_dim, "image encoder");
  return v;
}

std::vector<float> EmbeddingBackend::embed_text(const TokenSequence& tokens) {
  if (static_cast<int>(tokens.ids.size()) != profile_.context_length) {
    fail(ErrorCode::kDimensionMismatch,
         "token sequence length does not match context_length " +
             std::to_string(profile_.context_length));
  }
  auto v = run_text(tokens);
  check_output(v, profile_.text_dim, "text encoder");
  return v;
}

std::vector<float> EmbeddingBackend::embed_record(const corpus::SampleRecord& record,
                                                  Modality modality,
                                                  const std::filesystem::path& image_root) {
  if (modality == Modality::kImage) {
    const auto image = decode_image(image_root / record.image_path);
    return embed_image(preprocess_image(image, profile_));
  }
  return embed_text(tokenizer().encode(record.caption, profile_.context_length));
}

void l2_normalize(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<float> fuse(std::span<const float> image_vec, std::span<const float> text_vec) {
  std::vector<float> out;
  out.reserve(image_vec.size() + text_vec.size());
  out.insert(out.end(), image_vec.begin(), image_vec.end());
  out.insert(out.end(), text_vec.begin(), text_vec.end());
  return out;
}

}  // namespace diffdetect::embedding
