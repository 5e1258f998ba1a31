#pragma once

#include <stdexcept>
#include <string>

namespace fedpdmc {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  EmptyInput,
  AcceptRatioExceeded,
  ZeroGradient,
  AllInfinite,
  NodeNotOwned,
  InfeasibleEpsilon,
  AdaptationFailed,
  ConfigInvalid,
  ParseError,
  IoError,
  TransportError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::AcceptRatioExceeded: return "ACCEPT_RATIO_EXCEEDED";
    case ErrorCode::ZeroGradient: return "ZERO_GRADIENT";
    case ErrorCode::AllInfinite: return "ALL_INFINITE";
    case ErrorCode::NodeNotOwned: return "NODE_NOT_OWNED";
    case ErrorCode::InfeasibleEpsilon: return "INFEASIBLE_EPSILON";
    case ErrorCode::AdaptationFailed: return "ADAPTATION_FAILED";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::TransportError: return "TRANSPORT_ERROR";
  }
  return "UNKNOWN";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thinning tripwire; carries the id of the worker whose bound failed (0 = not a worker).
class AcceptRatioExceeded : public Error {
 public:
  AcceptRatioExceeded(double ratio, int worker_id = 0)
      : Error(ErrorCode::AcceptRatioExceeded,
              "acceptance ratio " + std::to_string(ratio) + " exceeds 1" +
                  (worker_id > 0 ? " (worker " + std::to_string(worker_id) + ")" : std::string())),
        ratio_(ratio),
        worker_id_(worker_id) {}

  double ratio() const noexcept { return ratio_; }
  int worker_id() const noexcept { return worker_id_; }

 private:
  double ratio_;
  int worker_id_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace detail
}  // namespace fedpdmc
