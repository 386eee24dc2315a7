#include "cellomaps/error.hpp"

namespace cellomaps {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::ConflictingRules: return "ConflictingRules";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonzeroPadding: return "NonzeroPadding";
    case ErrorCode::TooManyChannels: return "TooManyChannels";
    case ErrorCode::EmptyTile: return "EmptyTile";
    case ErrorCode::TileTooLarge: return "TileTooLarge";
    case ErrorCode::OddTileSide: return "OddTileSide";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InsufficientPatients: return "InsufficientPatients";
    case ErrorCode::StratificationFailed: return "StratificationFailed";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OffGridOrigin: return "OffGridOrigin";
    case ErrorCode::DuplicateCoordinate: return "DuplicateCoordinate";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace cellomaps
