#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace recap {

enum class ErrorCode {
  kMalformedInput,
  kEmptyTranscript,
  kIndexOutOfRange,
  kUncoveredPosition,
  kTranscriptTooShort,
  kLengthMismatch,
  kInvalidArgument,
  kBackendFailure,
  kEmptyRewrite,
  kCrossRefInvalid,
  kSchemaViolation,
  kNodeNotFound,
  kStaleVersion,
  kValidationFailure,
  kIllegalAction,
  kNotFound,
  kNotReady,
  kForbidden,
  kTooLarge,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Base exception for every failure raised by the library. Callers branch on
// code(); the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Portable-document decoding failure. path() points at the offending field
// in jq-like notation, e.g. ".highlights.key_points[2].summary".
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string path, const std::string& message)
      : Error(ErrorCode::kSchemaViolation,
              "schema violation at '" + path + "': " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class BackendFailureKind { kTimeout, kHttp, kMalformedResponse, kExhausted };

std::string_view to_string(BackendFailureKind kind);

class BackendFailure : public Error {
 public:
  BackendFailure(BackendFailureKind kind, const std::string& message,
                 int http_status = 0, int attempts = 1)
      : Error(ErrorCode::kBackendFailure,
              std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        http_status_(http_status),
        attempts_(attempts) {}

  BackendFailureKind kind() const noexcept { return kind_; }
  // Non-zero only for kHttp, or for kExhausted when the last attempt got a
  // response.
  int http_status() const noexcept { return http_status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  BackendFailureKind kind_;
  int http_status_;
  int attempts_;
};

}  // namespace recap
