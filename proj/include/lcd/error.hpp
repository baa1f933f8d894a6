#pragma once
// Error codes shared by every module. CLI maps invalid_config to exit 2,
// everything else to exit 3.

#include <stdexcept>
#include <string>

namespace lcd {

enum class ErrorCode {
  invalid_config,
  invalid_input,
  not_found,
  out_of_bounds,
  degenerate_scale,
  placement_capacity,
  empty_knowledge_base,
  provenance_violation,
  insufficient_data,
  lifecycle_order,
  io_error,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::out_of_bounds: return "out-of-bounds";
    case ErrorCode::degenerate_scale: return "degenerate-scale";
    case ErrorCode::placement_capacity: return "placement-capacity";
    case ErrorCode::empty_knowledge_base: return "empty-knowledge-base";
    case ErrorCode::provenance_violation: return "provenance-violation";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::lifecycle_order: return "lifecycle-order";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace lcd
