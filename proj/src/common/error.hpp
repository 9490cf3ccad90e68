#pragma once

#include <stdexcept>
#include <string>

namespace diffdetect {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kValidation = 4,
  kBackend = 5,
  kDimensionMismatch = 6,
  kUndefined = 7,
  kFormat = 8,
};

const char* to_string(ErrorCode code);

// Every failure raised by the core carries one of the codes above; the C API
// maps it to a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace diffdetect
