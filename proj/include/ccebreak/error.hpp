#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccebreak {

/// Failure categories raised by the library. The CLI maps each onto an exit code.
enum class Errc {
    // input / usage
    invalid_argument,
    parse_error,
    io_error,
    unbalanced_panel,
    duplicate_observation,
    non_finite_value,
    ragged_row,
    non_finite_input,
    config_invariant_violation,
    // statistical
    rank_deficient_design,
    rank_condition_failure,
    singular_covariance,
    empty_candidate_set,
    zero_break_magnitude,
    degenerate_scale,
    horizon_not_converged,
    too_many_failed_replications,
    // anything else
    internal,
};

std::string_view to_string(Errc code) noexcept;

/// Process exit status for an error category: 1 usage/parse, 2 statistical, 3 internal.
int exit_status(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace ccebreak
