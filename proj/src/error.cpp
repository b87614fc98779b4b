#include "sketch_rl/error.hpp"

namespace sketch_rl {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument: return "invalid_argument";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kUnknownQuestion: return "unknown_question";
    case ErrorCategory::kOutsideSupport: return "outside_support";
    case ErrorCategory::kTransport: return "transport";
    case ErrorCategory::kUnparseableReply: return "unparseable_reply";
    case ErrorCategory::kEmptyOutput: return "empty_output";
    case ErrorCategory::kJudge: return "judge";
    case ErrorCategory::kValidationRate: return "validation_rate";
  }
  return "unknown";
}

}  // namespace sketch_rl
