#pragma once

#include <stdexcept>
#include <string>

namespace vfp {

/// Coarse error class, used by the CLI to pick an exit code:
/// Config -> 2, Io -> 3, Data -> 4.
enum class ErrorKind { Config, Io, Data };

enum class ErrorCode {
    // configuration / arguments
    InvalidConfig,
    InvalidArgument,
    InvalidSpec,
    // file and format problems
    FileNotFound,
    WriteFailed,
    UnsupportedFormat,
    CorruptHeader,
    TruncatedData,
    BadMagic,
    VersionMismatch,
    Truncated,
    InvalidManifest,
    // domain problems
    SpacingOverflow,
    VolumeTooSmall,
    DuplicateModality,
    EmptyCohort,
    UnknownSubject,
    OverlappingModalities,
    MismatchedCohorts,
    NoProbes,
    TooFewPairs,
    SliceOutOfRange,
};

inline ErrorKind kind_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::InvalidArgument:
        case ErrorCode::InvalidSpec:
            return ErrorKind::Config;
        case ErrorCode::FileNotFound:
        case ErrorCode::WriteFailed:
        case ErrorCode::UnsupportedFormat:
        case ErrorCode::CorruptHeader:
        case ErrorCode::TruncatedData:
        case ErrorCode::BadMagic:
        case ErrorCode::VersionMismatch:
        case ErrorCode::Truncated:
        case ErrorCode::InvalidManifest:
            return ErrorKind::Io;
        default:
            return ErrorKind::Data;
    }
}

inline const char* name_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::FileNotFound: return "FileNotFound";
        case ErrorCode::WriteFailed: return "WriteFailed";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptHeader: return "CorruptHeader";
        case ErrorCode::TruncatedData: return "TruncatedData";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::Truncated: return "Truncated";
        case ErrorCode::InvalidManifest: return "InvalidManifest";
        case ErrorCode::SpacingOverflow: return "SpacingOverflow";
        case ErrorCode::VolumeTooSmall: return "VolumeTooSmall";
        case ErrorCode::DuplicateModality: return "DuplicateModality";
        case ErrorCode::EmptyCohort: return "EmptyCohort";
        case ErrorCode::UnknownSubject: return "UnknownSubject";
        case ErrorCode::OverlappingModalities: return "OverlappingModalities";
        case ErrorCode::MismatchedCohorts: return "MismatchedCohorts";
        case ErrorCode::NoProbes: return "NoProbes";
        case ErrorCode::TooFewPairs: return "TooFewPairs";
        case ErrorCode::SliceOutOfRange: return "SliceOutOfRange";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(name_of(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }
    ErrorKind kind() const { return kind_of(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace vfp
