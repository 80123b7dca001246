#include "ccebreak/error.hpp"

namespace ccebreak {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::parse_error: return "ParseError";
        case Errc::io_error: return "IoError";
        case Errc::unbalanced_panel: return "UnbalancedPanel";
        case Errc::duplicate_observation: return "DuplicateObservation";
        case Errc::non_finite_value: return "NonFiniteValue";
        case Errc::ragged_row: return "RaggedRow";
        case Errc::non_finite_input: return "NonFiniteInput";
        case Errc::config_invariant_violation: return "ConfigInvariantViolation";
        case Errc::rank_deficient_design: return "RankDeficientDesign";
        case Errc::rank_condition_failure: return "RankConditionFailure";
        case Errc::singular_covariance: return "SingularCovariance";
        case Errc::empty_candidate_set: return "EmptyCandidateSet";
        case Errc::zero_break_magnitude: return "ZeroBreakMagnitude";
        case Errc::degenerate_scale: return "DegenerateScale";
        case Errc::horizon_not_converged: return "HorizonNotConverged";
        case Errc::too_many_failed_replications: return "TooManyFailedReplications";
        case Errc::internal: return "InternalError";
    }
    return "InternalError";
}

int exit_status(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument:
        case Errc::parse_error:
        case Errc::io_error:
        case Errc::unbalanced_panel:
        case Errc::duplicate_observation:
        case Errc::non_finite_value:
        case Errc::ragged_row:
        case Errc::non_finite_input:
        case Errc::config_invariant_violation:
            return 1;
        case Errc::rank_deficient_design:
        case Errc::rank_condition_failure:
        case Errc::singular_covariance:
        case Errc::empty_candidate_set:
        case Errc::zero_break_magnitude:
        case Errc::degenerate_scale:
        case Errc::horizon_not_converged:
        case Errc::too_many_failed_replications:
            return 2;
        case Errc::internal:
            return 3;
    }
    return 3;
}

}  // namespace ccebreak
