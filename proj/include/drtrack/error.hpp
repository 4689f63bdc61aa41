#pragma once

#include <stdexcept>
#include <string>

namespace drtrack {

enum class ErrorCode {
  invalid_argument,
  unsupported_box,
  invalid_configuration,
  feedback_mismatch,
  infeasible_load,
  sampling_failure,
  invalid_ranges,
  invariant_violation,
  io_failure,
};

inline const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` says which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::unsupported_box: return "unsupported box";
    case ErrorCode::invalid_configuration: return "invalid configuration";
    case ErrorCode::feedback_mismatch: return "feedback mismatch";
    case ErrorCode::infeasible_load: return "infeasible load";
    case ErrorCode::sampling_failure: return "sampling failure";
    case ErrorCode::invalid_ranges: return "invalid ranges";
    case ErrorCode::invariant_violation: return "invariant violation";
    case ErrorCode::io_failure: return "i/o failure";
  }
  return "error";
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace drtrack
