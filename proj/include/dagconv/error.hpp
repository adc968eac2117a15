#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dagconv {

enum class ErrorCode {
  // architecture parsing and validation
  MalformedString,
  UnknownOp,
  BadIndex,
  MalformedDocument,
  CycleOrBackwardEdge,
  DuplicateEdge,
  NodeOutOfRange,
  TooManyNodes,
  // topology metrics and filtering
  NoPath,
  DepthZero,
  EmptySpace,
  RadiusZero,
  InvalidConfig,
  ConfigMissing,
  // kernel engine
  DomainError,
  Unreachable,
  BadGram,
  OrderingViolation,
  // statistics
  MissingHeader,
  UnparsableRow,
  DegenerateVariance,
  SingularPredictorMatrix,
  // simulator
  Divergence,
  DimensionMismatch,
  // misc
  IoError,
  InvariantViolation,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedString: return "MalformedString";
    case ErrorCode::UnknownOp: return "UnknownOp";
    case ErrorCode::BadIndex: return "BadIndex";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::CycleOrBackwardEdge: return "CycleOrBackwardEdge";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::NodeOutOfRange: return "NodeOutOfRange";
    case ErrorCode::TooManyNodes: return "TooManyNodes";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::DepthZero: return "DepthZero";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::RadiusZero: return "RadiusZero";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConfigMissing: return "ConfigMissing";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::BadGram: return "BadGram";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::UnparsableRow: return "UnparsableRow";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SingularPredictorMatrix: return "SingularPredictorMatrix";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

/// Exception type thrown by every dagconv operation. The code is stable and
/// machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dagconv
