#pragma once

#include <stdexcept>
#include <string>

namespace longal {

enum class ErrorCode {
    DimensionMismatch,
    InsufficientTimepoints,
    MissingSlice,
    DuplicateSlice,
    GeometryError,
    TooFewPatients,
    ShapeMismatch,
    EmptyLabeledSet,
    EmptyUnlabeledSet,
    InsufficientPasses,
    NonFiniteLoss,
    BudgetExceedsPool,
    MissingGroundTruth,
    CorruptCheckpoint,
    InvalidConfig,
    IoError,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InsufficientTimepoints: return "InsufficientTimepoints";
        case ErrorCode::MissingSlice: return "MissingSlice";
        case ErrorCode::DuplicateSlice: return "DuplicateSlice";
        case ErrorCode::GeometryError: return "GeometryError";
        case ErrorCode::TooFewPatients: return "TooFewPatients";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyLabeledSet: return "EmptyLabeledSet";
        case ErrorCode::EmptyUnlabeledSet: return "EmptyUnlabeledSet";
        case ErrorCode::InsufficientPasses: return "InsufficientPasses";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::BudgetExceedsPool: return "BudgetExceedsPool";
        case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, std::string(error_code_name(code)) + ": " + msg);
}

}  // namespace longal
