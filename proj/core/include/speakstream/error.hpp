#pragma once

#include <stdexcept>
#include <string>

namespace speakstream {

enum class ErrorCode {
    EmptyInput,
    InvalidConfig,
    InvalidInput,
    InvalidBin,
    EmptyReference,
    AlignmentMismatch,
    MalformedSequence,
    InvalidToken,
    CacheDesync,
    EmptyLoss,
    NumericalError,
    InvalidPhase,
    SegmentOverrun,
    NoSpeechDetected,
    IoError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::InvalidBin: return "InvalidBin";
        case ErrorCode::EmptyReference: return "EmptyReference";
        case ErrorCode::AlignmentMismatch: return "AlignmentMismatch";
        case ErrorCode::MalformedSequence: return "MalformedSequence";
        case ErrorCode::InvalidToken: return "InvalidToken";
        case ErrorCode::CacheDesync: return "CacheDesync";
        case ErrorCode::EmptyLoss: return "EmptyLoss";
        case ErrorCode::NumericalError: return "NumericalError";
        case ErrorCode::InvalidPhase: return "InvalidPhase";
        case ErrorCode::SegmentOverrun: return "SegmentOverrun";
        case ErrorCode::NoSpeechDetected: return "NoSpeechDetected";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace speakstream
