#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stormcast {

enum class ErrorCode {
  // validation errors (bad input, caller's fault)
  InvalidArgument,
  InvalidGeometry,
  OutOfBounds,
  GeometryMismatch,
  TimestampMismatch,
  TimestampGap,
  BadKernel,
  BadDistribution,
  BadConfig,
  InvalidOffset,
  SchemaMismatch,
  SchemaFrameMismatch,
  NonNormalizedInput,
  // data / runtime errors
  IoError,
  BadMagic,
  TruncatedPayload,
  UnknownDtype,
  MissingHeader,
  MissingRaster,
  MissingArtifact,
  ConfigHashMismatch,
  InsufficientData,
  EmptyTraining,
  NoValidSplit,
  NotTreeModel,
  OneClassOnly,
  DivisionByZero,
  Locked,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes that signal invalid caller input rather than a runtime failure.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace stormcast
