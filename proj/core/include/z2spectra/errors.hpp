#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace z2s {

enum class ErrorCode {
    InvalidConfiguration,
    AntipodalPoint,
    AntipodalPair,
    SeparationViolation,
    MatchingFailed,
    QualityFailure,
    SingularMass,
    ShiftSingular,
    NotConverged,
    LiftPrecondition,
    LiftInconsistent,
    PoorFit,
    DimensionMismatch,
    RankDeficient,
    NotFound,
    WindowDrift,
    FunctionalRankDeficient,
    StepTooLarge,
    CorruptStore,
    InputError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure mode named by the public API maps to one code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// True for errors caused by bad user input rather than a numerical failure.
    bool is_input_error() const noexcept;

private:
    ErrorCode code_;
};

}  // namespace z2s
