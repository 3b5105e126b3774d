#pragma once

#include <stdexcept>
#include <string>

namespace mg {

/// Failure categories. The CLI maps each one to its own exit code.
enum class ErrorCategory {
  structural = 10,  // shape mismatch, malformed graph
  ingestion = 11,   // bad motion file contents
  numerical = 12,   // NaN/Inf, divergence
  config = 13,      // invalid configuration or arguments
  io = 14,          // filesystem failures
  format = 15,      // corrupt or incompatible bundle
  no_candidate = 16 // 1NN pool contains no sample of the target class
};

const char* to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline Error structural_error(const std::string& what) { return {ErrorCategory::structural, what}; }
inline Error ingestion_error(const std::string& what) { return {ErrorCategory::ingestion, what}; }
inline Error numerical_error(const std::string& what) { return {ErrorCategory::numerical, what}; }
inline Error config_error(const std::string& what) { return {ErrorCategory::config, what}; }
inline Error io_error(const std::string& what) { return {ErrorCategory::io, what}; }
inline Error format_error(const std::string& what) { return {ErrorCategory::format, what}; }

}  // namespace mg
