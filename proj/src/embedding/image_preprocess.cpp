#include "embedding/image_preprocess.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstring>

#include "common/error.hpp"

namespace diffdetect::embedding {

RgbImage decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kIo, "image not found: " + path.string());
  }
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    fail(ErrorCode::kFormat, "cannot decode image " + path.string() + ": " + e.what());
  }
  if (bgr.empty()) {
    fail(ErrorCode::kFormat, "cannot decode image " + path.string());
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out;
  out.width = rgb.cols;
  out.height = rgb.rows;
  out.pixels.resize(static_cast<std::size_t>(rgb.cols) * rgb.rows * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(out.pixels.data() + static_cast<std::size_t>(y) * rgb.cols * 3,
                rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

ImageTensor preprocess_image(const RgbImage& image, const BackboneProfile& profile) {
  if (image.width < 1 || image.height < 1) {
    fail(ErrorCode::kInvalidArgument, "zero-size image");
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    fail(ErrorCode::kInvalidArgument, "pixel buffer does not match image size");
  }
  const int r = profile.input_resolution;

  // cv::Mat header over the caller's buffer; never written.
  const cv::Mat src(image.height, image.width, CV_8UC3,
                    const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat resized;
  const int short_side = std::min(image.width, image.height);
  if (short_side == r) {
    resized = src;
  } else {
    int new_w = r;
    int new_h = r;
    if (image.width > image.height) {
      new_w = static_cast<int>(static_cast<long long>(r) * image.width / image.height);
    } else if (image.height > image.width) {
      new_h = static_cast<int>(static_cast<long long>(r) * image.height / image.width);
    }
    cv::resize(src, resized, cv::Size(new_w, new_h), 0, 0, cv::INTER_CUBIC);
  }

  const int top = static_cast<int>(std::lround((resized.rows - r) / 2.0));
  const int left = static_cast<int>(std::lround((resized.cols - r) / 2.0));

  ImageTensor out;
  out.resolution = r;
  out.data.resize(static_cast<std::size_t>(3) * r * r);
  const std::size_t plane = static_cast<std::size_t>(r) * r;
  for (int y = 0; y < r; ++y) {
    const auto* row = resized.ptr<std::uint8_t>(top + y) + static_cast<std::size_t>(left) * 3;
    for (int x = 0; x < r; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = static_cast<float>(row[x * 3 + c]) / 255.0f;
        out.data[c * plane + static_cast<std::size_t>(y) * r + x] =
            (v - profile.channel_mean[c]) / profile.channel_std[c];
      }
    }
  }
  return out;
}

}  // namespace diffdetect::embedding
