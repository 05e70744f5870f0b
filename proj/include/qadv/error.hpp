#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qadv {

// Machine-readable error category; the CLI maps each to its own exit code.
enum class ErrorCategory {
  config,
  io,
  data,
  numeric,
  infeasible,
  unsupported,
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::infeasible: return "infeasible";
    case ErrorCategory::unsupported: return "unsupported";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  return 2 + static_cast<int>(c);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

inline void require(bool cond, ErrorCategory c, const std::string& what) {
  if (!cond) fail(c, what);
}

}  // namespace qadv
