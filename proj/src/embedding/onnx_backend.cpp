#include <opencv2/dnn.hpp>

#include "common/error.hpp"
#include "embedding/backend.hpp"

namespace diffdetect::embedding {

struct OnnxBackend::Nets {
  cv::dnn::Net image;
  cv::dnn::Net text;
  bool has_image = false;
  bool has_text = false;
};

namespace {

cv::dnn::Net load_net(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kIo, "ONNX graph not found: " + path.string());
  }
  try {
    auto net = cv::dnn::readNetFromONNX(path.string());
    net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
    return net;
  } catch (const cv::Exception& e) {
    fail(ErrorCode::kBackend, "cannot load ONNX graph " + path.string() + ": " + e.what());
  }
}

std::vector<float> run(cv::dnn::Net& net, const cv::Mat& input, const char* input_name,
                       const char* output_name) {
  cv::Mat out;
  try {
    net.setInput(input, input_name);
    out = net.forward(output_name);
  } catch (const cv::Exception& e) {
    fail(ErrorCode::kBackend, std::string("ONNX execution failed: ") + e.what());
  }
  if (out.type() != CV_32F || out.dims < 2 || out.size[0] != 1) {
    fail(ErrorCode::kDimensionMismatch,
         std::string("unexpected shape for graph output \"") + output_name + "\"");
  }
  const cv::Mat flat = out.reshape(1, 1);
  return std::vector<float>(flat.ptr<float>(0), flat.ptr<float>(0) + flat.total());
}

}  // namespace

OnnxBackend::OnnxBackend(BackboneProfile profile, std::shared_ptr<const BpeTokenizer> tokenizer)
    : EmbeddingBackend(std::move(profile), std::move(tokenizer)), nets_(std::make_unique<Nets>()) {
  if (!this->profile().image_model_path.empty()) {
    nets_->image = load_net(this->profile().image_model_path);
    nets_->has_image = true;
  }
  if (!this->profile().text_model_path.empty()) {
    nets_->text = load_net(this->profile().text_model_path);
    nets_->has_text = true;
  }
}

OnnxBackend::~OnnxBackend() = default;

std::vector<float> OnnxBackend::run_image(const ImageTensor& tensor) {
  if (!nets_->has_image) {
    fail(ErrorCode::kBackend, "profile " + profile().name + " has no image graph");
  }
  const int r = tensor.resolution;
  const int shape[4] = {1, 3, r, r};
  // The blob aliases the tensor; setInput copies it into the network.
  const cv::Mat blob(4, shape, CV_32F, const_cast<float*>(tensor.data.data()));
  return run(nets_->image, blob, "pixel_values", "image_embeds");
}

std::vector<float> OnnxBackend::run_text(const TokenSequence& tokens) {
  if (!nets_->has_text) {
    fail(ErrorCode::kBackend, "profile " + profile().name + " has no text graph");
  }
  // OpenCV's DNN importer feeds every input as f32; ids below 2^24 are exact.
  const int shape[2] = {1, static_cast<int>(tokens.ids.size())};
  cv::Mat ids(2, shape, CV_32F);
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    ids.ptr<float>(0)[i] = static_cast<float>(tokens.ids[i]);
  }
  return run(nets_->text, ids, "input_ids", "text_embeds");
}

}  // namespace diffdetect::embedding
