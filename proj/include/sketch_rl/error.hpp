#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sketch_rl {

// Coarse failure classes. The CLI prints the category name as the first
// token of its one-line error report.
enum class ErrorCategory {
  kInvalidArgument,
  kConfig,
  kIo,
  kUnknownQuestion,
  kOutsideSupport,
  kTransport,
  kUnparseableReply,
  kEmptyOutput,
  kJudge,
  kValidationRate,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Raised when a judge or converter reply carries no usable number/text.
// Keeps the raw reply for diagnostics.
class UnparseableReplyError : public Error {
 public:
  UnparseableReplyError(const std::string& message, std::string raw_reply)
      : Error(ErrorCategory::kUnparseableReply, message),
        raw_reply_(std::move(raw_reply)) {}

  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string raw_reply_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace sketch_rl
