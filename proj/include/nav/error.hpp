#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nav {

enum class ErrorCode {
  MissingField,
  InvalidDate,
  EmptyTitle,
  InvalidDocument,
  InvalidSize,
  VersionMismatch,
  SpanOutOfBounds,
  StageMismatch,
  UnknownDocument,
  UnparseableReference,
  UnknownEndpoint,
  KindConstraintViolation,
  EmptyQuery,
  EmptyText,
  EmptyIndex,
  DuplicateKey,
  DimensionMismatch,
  NoActiveModules,
  InvalidWeights,
  InsufficientClasses,
  UnknownConcept,
  PreconditionViolation,
  Io,
  Format,
  Config,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-readable code; callers branch on code(), not on the message.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  explicit Error(ErrorCode code) : Error(code, "") {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace nav
