#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ape {

enum class ErrorCode {
    InvalidParameter,
    DimensionError,
    NotSpecialOrthogonal,
    LogFailed,
    DecompositionFailed,
    NotOrthogonal,
    StructureMismatch,
    InversionUnavailable,
    InvalidGenerator,
    DimensionSplitError,
    InvalidPositionTensor,
    InvalidPosition,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers what went wrong.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::DimensionError: return "DimensionError";
        case ErrorCode::NotSpecialOrthogonal: return "NotSpecialOrthogonal";
        case ErrorCode::LogFailed: return "LogFailed";
        case ErrorCode::DecompositionFailed: return "DecompositionFailed";
        case ErrorCode::NotOrthogonal: return "NotOrthogonal";
        case ErrorCode::StructureMismatch: return "StructureMismatch";
        case ErrorCode::InversionUnavailable: return "InversionUnavailable";
        case ErrorCode::InvalidGenerator: return "InvalidGenerator";
        case ErrorCode::DimensionSplitError: return "DimensionSplitError";
        case ErrorCode::InvalidPositionTensor: return "InvalidPositionTensor";
        case ErrorCode::InvalidPosition: return "InvalidPosition";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace ape
