#include "motionguide/errors.hpp"

namespace mg {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::structural: return "structural";
    case ErrorCategory::ingestion: return "ingestion";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::no_candidate: return "no-candidate";
  }
  return "unknown";
}

}  // namespace mg
