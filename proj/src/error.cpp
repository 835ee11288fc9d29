#include "fracmix/error.hpp"

namespace fracmix {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidDomain: return "InvalidDomain";
        case ErrorCode::InvalidPartition: return "InvalidPartition";
        case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
        case ErrorCode::TooCoarse: return "TooCoarse";
        case ErrorCode::EmptyDirichletSet: return "EmptyDirichletSet";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::BasisMismatch: return "BasisMismatch";
        case ErrorCode::SubcriticalDimension: return "SubcriticalDimension";
        case ErrorCode::BadGrading: return "BadGrading";
        case ErrorCode::SolverDivergence: return "SolverDivergence";
        case ErrorCode::ExponentViolation: return "ExponentViolation";
        case ErrorCode::EmptyBall: return "EmptyBall";
        case ErrorCode::DegenerateProfile: return "DegenerateProfile";
        case ErrorCode::BadExponent: return "BadExponent";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::NoData: return "NoData";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace fracmix
