#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace jrcss {

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
  config = 2,
  physics = 3,
  numerical = 4,
};

/// Exception carrying a stable machine-readable code (e.g. "empty-record")
/// plus free-form detail. Field paths go in the detail for config errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        kind_(kind),
        code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] inline void fail_physics(std::string code, const std::string& detail = {}) {
  throw Error(ErrorKind::physics, std::move(code), detail);
}

[[noreturn]] inline void fail_numerical(std::string code, const std::string& detail = {}) {
  throw Error(ErrorKind::numerical, std::move(code), detail);
}

[[noreturn]] inline void fail_config(std::string code, const std::string& detail = {}) {
  throw Error(ErrorKind::config, std::move(code), detail);
}

}  // namespace jrcss
