#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bpre {

/// Machine-readable failure causes. The CLI maps every code to exit status 1
/// and echoes `code_name()` in its JSON error envelope.
enum class ErrorCode {
  zero_offspring,
  not_normalized,
  invalid_law,
  invalid_environment,
  not_supercritical,
  degenerate,
  threshold_exceeded,
  infeasible_enumeration,
  domain_error,
  hypothesis_unmet,
  config_parse,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::zero_offspring: return "ZERO_OFFSPRING";
    case ErrorCode::not_normalized: return "NOT_NORMALIZED";
    case ErrorCode::invalid_law: return "INVALID_LAW";
    case ErrorCode::invalid_environment: return "INVALID_ENVIRONMENT";
    case ErrorCode::not_supercritical: return "NOT_SUPERCRITICAL";
    case ErrorCode::degenerate: return "DEGENERATE";
    case ErrorCode::threshold_exceeded: return "THRESHOLD_EXCEEDED";
    case ErrorCode::infeasible_enumeration: return "INFEASIBLE_ENUMERATION";
    case ErrorCode::domain_error: return "DOMAIN_ERROR";
    case ErrorCode::hypothesis_unmet: return "HYPOTHESIS_UNMET";
    case ErrorCode::config_parse: return "CONFIG_PARSE";
  }
  return "UNKNOWN";
}

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

}  // namespace bpre
