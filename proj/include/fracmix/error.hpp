#pragma once

#include <stdexcept>
#include <string>

namespace fracmix {

enum class ErrorCode {
    InvalidDomain,
    InvalidPartition,
    AlphaOutOfRange,
    TooCoarse,
    EmptyDirichletSet,
    ConvergenceFailure,
    BasisMismatch,
    SubcriticalDimension,
    BadGrading,
    SolverDivergence,
    ExponentViolation,
    EmptyBall,
    DegenerateProfile,
    BadExponent,
    ConfigError,
    MissingField,
    NoData,
    IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    ErrorCode code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace fracmix
