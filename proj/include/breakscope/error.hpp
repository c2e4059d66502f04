#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace breakscope {

enum class ErrorCode {
  InvalidArgument,
  MissingFile,
  MalformedRow,
  DuplicateDate,
  AllDropped,
  NonPositiveValue,
  TooShort,
  WindowTooLong,
  ZeroVariance,
  DegenerateSubseries,
  InsufficientScales,
  NonFiniteMoment,
  OutOfRange,
  NotNormalized,
  EmptyTable,
  DegenerateDimension,
  NoOverlap,
  SingularSegment,
  NumericalUnderflow,
  OutOfAxis,
  Unstable,
  EmbeddingFailure,
  EmptyCatalog,
  PartialFailure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateDate: return "DuplicateDate";
    case ErrorCode::AllDropped: return "AllDropped";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegenerateSubseries: return "DegenerateSubseries";
    case ErrorCode::InsufficientScales: return "InsufficientScales";
    case ErrorCode::NonFiniteMoment: return "NonFiniteMoment";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::DegenerateDimension: return "DegenerateDimension";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::SingularSegment: return "SingularSegment";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::OutOfAxis: return "OutOfAxis";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::EmbeddingFailure: return "EmbeddingFailure";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::PartialFailure: return "PartialFailure";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. `line()` is set for
/// MalformedRow / DuplicateDate raised while reading a file (1-based, 0 otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

}  // namespace breakscope
