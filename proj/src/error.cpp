#include "hessnet/error.hpp"

namespace hessnet {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidModel: return "invalid model";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::BadIndex: return "bad index";
    case ErrorCode::NotSymmetric: return "not symmetric";
    case ErrorCode::ReluKink: return "Hessian undefined at ReLU kink";
    case ErrorCode::NotRelu: return "non-ReLU activation";
  }
  return "unknown";
}

}  // namespace hessnet
