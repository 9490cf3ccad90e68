#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embedding/profile.hpp"

namespace diffdetect::embedding {

// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// Planar [3, R, R] float tensor.
struct ImageTensor {
  int resolution = 0;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * resolution + y) * resolution + x];
  }
};

// Throws Error(kIo) when the file is missing, Error(kFormat) when it cannot
// be decoded.
RgbImage decode_image(const std::filesystem::path& path);

// Shorter side to R (bicubic), centre crop R x R, scale to [0,1], then
// (x - mean_c) / std_c per channel.
ImageTensor preprocess_image(const RgbImage& image, const BackboneProfile& profile);

}  // namespace diffdetect::embedding
