#pragma once

#include <stdexcept>
#include <string>

namespace sphinx {

/// Error category, used by the CLI to pick an exit code.
enum class ErrorCategory {
  Usage,
  Config,
  Io,
  Data,
  Provider,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Provider: return "provider";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

  static Error config(const std::string& msg) { return {ErrorCategory::Config, msg}; }
  static Error io(const std::string& msg) { return {ErrorCategory::Io, msg}; }
  static Error data(const std::string& msg) { return {ErrorCategory::Data, msg}; }
  static Error provider(const std::string& msg) { return {ErrorCategory::Provider, msg}; }

 private:
  ErrorCategory category_;
};

}  // namespace sphinx
