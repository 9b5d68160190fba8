#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace guiguard {

enum class ErrorCode {
  kMissingImage,
  kSchemaViolation,
  kDuplicateTrajectoryId,
  kIoFailure,
  kEmptyText,
  kEmptyPlan,
  kUnparseableVerdict,
  kEmptyInput,
  kNoGroundTruth,
  kNoMatches,
  kDegenerateAgreement,
  kInvalidArgument,
  kEmptyLog,
  kRegionOutOfBounds,
  kFontUnavailable,
  kNotImplemented,
  kAuthFailure,
  kTransportFailure,
  kRateLimited,
  kMalformedResponse,
  kMissingBaseline,
  kEmptyPolicyList,
  kConfigError,
  kImageDecode,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported with this exception; `code()` is the
// machine-readable part, `what()` carries the context (ids, field paths).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace guiguard
