#include "brushwork/error.hpp"

namespace brushwork {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::FileNotFound: return "FileNotFound";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptImage: return "CorruptImage";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
        case ErrorCode::DuplicatePath: return "DuplicatePath";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::TileLargerThanImage: return "TileLargerThanImage";
        case ErrorCode::NoSalientTiles: return "NoSalientTiles";
        case ErrorCode::InvalidArchitecture: return "InvalidArchitecture";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::TileSizeMismatch: return "TileSizeMismatch";
        case ErrorCode::EmptyScores: return "EmptyScores";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::DuplicateSize: return "DuplicateSize";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace brushwork
