#include "stormcast/error.hpp"

namespace stormcast {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::InvalidGeometry: return "InvalidGeometry";
  case ErrorCode::OutOfBounds: return "OutOfBounds";
  case ErrorCode::GeometryMismatch: return "GeometryMismatch";
  case ErrorCode::TimestampMismatch: return "TimestampMismatch";
  case ErrorCode::TimestampGap: return "TimestampGap";
  case ErrorCode::BadKernel: return "BadKernel";
  case ErrorCode::BadDistribution: return "BadDistribution";
  case ErrorCode::BadConfig: return "BadConfig";
  case ErrorCode::InvalidOffset: return "InvalidOffset";
  case ErrorCode::SchemaMismatch: return "SchemaMismatch";
  case ErrorCode::SchemaFrameMismatch: return "SchemaFrameMismatch";
  case ErrorCode::NonNormalizedInput: return "NonNormalizedInput";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::TruncatedPayload: return "TruncatedPayload";
  case ErrorCode::UnknownDtype: return "UnknownDtype";
  case ErrorCode::MissingHeader: return "MissingHeader";
  case ErrorCode::MissingRaster: return "MissingRaster";
  case ErrorCode::MissingArtifact: return "MissingArtifact";
  case ErrorCode::ConfigHashMismatch: return "ConfigHashMismatch";
  case ErrorCode::InsufficientData: return "InsufficientData";
  case ErrorCode::EmptyTraining: return "EmptyTraining";
  case ErrorCode::NoValidSplit: return "NoValidSplit";
  case ErrorCode::NotTreeModel: return "NotTreeModel";
  case ErrorCode::OneClassOnly: return "OneClassOnly";
  case ErrorCode::DivisionByZero: return "DivisionByZero";
  case ErrorCode::Locked: return "Locked";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  return code <= ErrorCode::NonNormalizedInput;
}

} // namespace stormcast
