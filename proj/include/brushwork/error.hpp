#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brushwork {

enum class ErrorCode {
    InvalidArgument,
    FileNotFound,
    UnsupportedFormat,
    CorruptImage,
    MalformedRow,
    UnknownLabel,
    DuplicatePath,
    EmptyInput,
    TileLargerThanImage,
    NoSalientTiles,
    InvalidArchitecture,
    ShapeMismatch,
    NonFiniteLoss,
    EmptyClass,
    BadMagic,
    UnsupportedVersion,
    ChecksumMismatch,
    TileSizeMismatch,
    EmptyScores,
    InsufficientData,
    DuplicateSize,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The message carries the offending
/// path or value; `code()` is what callers branch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace brushwork
