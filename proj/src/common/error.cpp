#include "common/error.hpp"

namespace diffdetect {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kBackend: return "backend error";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kUndefined: return "undefined statistic";
    case ErrorCode::kFormat: return "format error";
  }
  return "unknown error";
}

}  // namespace diffdetect
