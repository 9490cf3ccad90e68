#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common/error.hpp"

namespace diffdetect::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with a little-endian host layout");

std::string read_file(const std::filesystem::path& path);

// Writes to "<path>.tmp.<pid>" then renames over `path`, so readers never see
// a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Little-endian byte sink for the binary formats.
class ByteWriter {
 public:
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.append(p, n);
  }
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(&value, sizeof(T));
  }
  void put_floats(std::span<const float> values) {
    put_bytes(values.data(), values.size_bytes());
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

// Bounds-checked reader; running past the end raises kFormat with `what`
// naming the file kind.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void get_bytes(void* out, std::size_t n) {
    require(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T value;
    get_bytes(&value, sizeof(T));
    return value;
  }
  std::string get_string(std::size_t n) {
    require(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void get_floats(std::span<float> out) { get_bytes(out.data(), out.size_bytes()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorCode::kFormat, what_ + ": truncated file");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace diffdetect::io
