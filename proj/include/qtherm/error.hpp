#pragma once

#include <stdexcept>
#include <string>

namespace qtherm {

enum class ErrorCode {
    DimMismatch,
    NonHermitianInput,
    UnknownPreset,
    InvalidParam,
    OutOfWindow,
    ZeroRate,
    StepTooLarge,
    NormCollapse,
    UnsupportedChannelSet,
    GridMismatch,
    MissingEndpoint,
    PositivityLoss,
    TooLarge,
    EmptyInput,
    AbsoluteIrreversibility,
    ConfigError,
    ParseError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::NonHermitianInput: return "NonHermitianInput";
        case ErrorCode::UnknownPreset: return "UnknownPreset";
        case ErrorCode::InvalidParam: return "InvalidParam";
        case ErrorCode::OutOfWindow: return "OutOfWindow";
        case ErrorCode::ZeroRate: return "ZeroRate";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::NormCollapse: return "NormCollapse";
        case ErrorCode::UnsupportedChannelSet: return "UnsupportedChannelSet";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::MissingEndpoint: return "MissingEndpoint";
        case ErrorCode::PositivityLoss: return "PositivityLoss";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::AbsoluteIrreversibility: return "AbsoluteIrreversibility";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace qtherm
