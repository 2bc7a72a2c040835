#include "z2spectra/errors.hpp"

namespace z2s {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfiguration: return "InvalidConfiguration";
        case ErrorCode::AntipodalPoint: return "AntipodalPoint";
        case ErrorCode::AntipodalPair: return "AntipodalPair";
        case ErrorCode::SeparationViolation: return "SeparationViolation";
        case ErrorCode::MatchingFailed: return "MatchingFailed";
        case ErrorCode::QualityFailure: return "QualityFailure";
        case ErrorCode::SingularMass: return "SingularMass";
        case ErrorCode::ShiftSingular: return "ShiftSingular";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::LiftPrecondition: return "LiftPrecondition";
        case ErrorCode::LiftInconsistent: return "LiftInconsistent";
        case ErrorCode::PoorFit: return "PoorFit";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::WindowDrift: return "WindowDrift";
        case ErrorCode::FunctionalRankDeficient: return "FunctionalRankDeficient";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::CorruptStore: return "CorruptStore";
        case ErrorCode::InputError: return "InputError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool Error::is_input_error() const noexcept {
    switch (code_) {
        case ErrorCode::InvalidConfiguration:
        case ErrorCode::AntipodalPair:
        case ErrorCode::SeparationViolation:
        case ErrorCode::InputError:
        case ErrorCode::IoError:
            return true;
        default:
            return false;
    }
}

}  // namespace z2s
