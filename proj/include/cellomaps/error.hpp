#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cellomaps {

enum class ErrorCode {
  MalformedInput,
  OutOfBounds,
  UnknownClass,
  ConflictingRules,
  InvalidScale,
  InvalidArgument,
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  NonzeroPadding,
  TooManyChannels,
  EmptyTile,
  TileTooLarge,
  OddTileSide,
  ShapeMismatch,
  EmptyDataset,
  InsufficientPatients,
  StratificationFailed,
  LengthMismatch,
  EmptyInput,
  OffGridOrigin,
  DuplicateCoordinate,
  SingleClassDataset,
  EmptyGraph,
  Io,
  Internal,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// All library failures are reported through this type; the code is what
// callers (and the CLI exit-code mapping) branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cellomaps
