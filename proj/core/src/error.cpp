#include "recap/error.hpp"

namespace recap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedInput: return "MalformedInput";
    case ErrorCode::kEmptyTranscript: return "EmptyTranscript";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kUncoveredPosition: return "UncoveredPosition";
    case ErrorCode::kTranscriptTooShort: return "TranscriptTooShort";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBackendFailure: return "BackendFailure";
    case ErrorCode::kEmptyRewrite: return "EmptyRewrite";
    case ErrorCode::kCrossRefInvalid: return "CrossRefInvalid";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kNodeNotFound: return "NodeNotFound";
    case ErrorCode::kStaleVersion: return "StaleVersion";
    case ErrorCode::kValidationFailure: return "ValidationFailure";
    case ErrorCode::kIllegalAction: return "IllegalAction";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kNotReady: return "NotReady";
    case ErrorCode::kForbidden: return "Forbidden";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(BackendFailureKind kind) {
  switch (kind) {
    case BackendFailureKind::kTimeout: return "Timeout";
    case BackendFailureKind::kHttp: return "Http";
    case BackendFailureKind::kMalformedResponse: return "MalformedResponse";
    case BackendFailureKind::kExhausted: return "Exhausted";
  }
  return "Unknown";
}

}  // namespace recap
