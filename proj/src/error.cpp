#include "guiguard/error.hpp"

namespace guiguard {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kDuplicateTrajectoryId: return "DuplicateTrajectoryId";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kEmptyPlan: return "EmptyPlan";
    case ErrorCode::kUnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNoGroundTruth: return "NoGroundTruth";
    case ErrorCode::kNoMatches: return "NoMatches";
    case ErrorCode::kDegenerateAgreement: return "DegenerateAgreement";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyLog: return "EmptyLog";
    case ErrorCode::kRegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::kFontUnavailable: return "FontUnavailable";
    case ErrorCode::kNotImplemented: return "NotImplemented";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kTransportFailure: return "TransportFailure";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kMissingBaseline: return "MissingBaseline";
    case ErrorCode::kEmptyPolicyList: return "EmptyPolicyList";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kImageDecode: return "ImageDecode";
  }
  return "Unknown";
}

}  // namespace guiguard
