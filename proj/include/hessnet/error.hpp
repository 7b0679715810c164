#pragma once

#include <stdexcept>
#include <string>

namespace hessnet {

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  InvalidModel,
  Parse,
  Io,
  BadIndex,
  NotSymmetric,
  ReluKink,
  NotRelu,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable category; the C API maps the
/// category onto a status code and the CLI onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace hessnet
