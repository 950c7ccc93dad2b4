#pragma once

#include <stdexcept>
#include <string>

namespace hdmap {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kNumeric = 4,
};

/// Base exception for every failure raised by the library. The code maps
/// one-to-one onto the status values of the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error invalid_argument(const std::string& what) { return {ErrorCode::kInvalidArgument, what}; }
inline Error io_error(const std::string& what) { return {ErrorCode::kIo, what}; }
inline Error parse_error(const std::string& what) { return {ErrorCode::kParse, what}; }
inline Error numeric_error(const std::string& what) { return {ErrorCode::kNumeric, what}; }

}  // namespace hdmap
