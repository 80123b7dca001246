#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccebreak/error.hpp"
#include "ccebreak/estimator.hpp"
#include "ccebreak/limit_dist.hpp"
#include "ccebreak/panel.hpp"

namespace ccebreak {

enum class Kernel {
    bartlett,           ///< k(u) = 1 - |u| on [-1, 1]
    truncated_uniform,  ///< k(u) = 1 on [-1, 1]
};

double kernel_weight(Kernel kernel, double u) noexcept;

/// Long-run covariance settings for Sigma_delta(b).
struct HacConfig {
    Kernel kernel = Kernel::bartlett;
    std::optional<int> bandwidth;  ///< S_T; empty means floor(T^(1/3))
    bool homoskedastic = false;    ///< use sigma2 * Omega_V^-1 instead of the kernel estimate

    /// S_T for a sample of T periods; at least 1.
    int resolve_bandwidth(std::size_t n_periods) const;
};

/**
 * @brief Kernel-weighted long-run covariance of the scores eps_{i,t} z_{i,t}.
 *
 * Psi_0 + sum_{j=1}^{T-1} k(j/S)(Psi_j + Psi_j') with
 * Psi_j = (NT)^-1 sum_i sum_{t>j} eps_{i,t} eps_{i,t-j} z_{i,t} z_{i,t-j}'. The residuals and
 * regressors are unit-major stacks with T rows per unit.
 */
Eigen::MatrixXd hac_long_run(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& z, Eigen::Index n_periods,
                             Kernel kernel, int bandwidth);

/// W(b) with the pieces it was built from.
struct WaldPoint {
    int break_date = 0;
    double wald = 0.0;
    Eigen::VectorXd delta;
    Eigen::MatrixXd omega_v;
    Eigen::MatrixXd sigma_delta;
};

/// W(b) = NT delta(b)' Sigma_delta(b)^-1 delta(b) under the testing-mode projection.
/// Errors: RankConditionFailure, SingularCovariance.
WaldPoint wald_detail(const PanelData& panel, const BreakSpec& spec, int break_date, const HacConfig& hac);

double wald_at(const PanelData& panel, const BreakSpec& spec, int break_date, const HacConfig& hac);

struct ExcludedCandidate {
    int break_date = 0;
    Errc reason = Errc::internal;
    std::string detail;
};

struct WaldResult {
    std::vector<int> candidate_dates;  ///< dates with a W(b) value
    std::vector<double> wald_values;
    std::vector<ExcludedCandidate> excluded;
    double sw = 0.0;
    double sw_critical = 0.0;
    double chi2_critical = 0.0;
    bool reject_sw = false;
    int argmax_date = 0;
    double trim_fraction = 0.15;
    double alpha = 0.05;
    int r = 0;
    int bandwidth = 0;
};

/// W(b) over the trimmed set, SW = max, and the decision against the sup-Bessel critical value.
WaldResult sup_wald(const PanelData& panel, const BreakSpec& spec, const HacConfig& hac, double alpha,
                    CriticalValues& critical_values);

/// A break found by the one-at-a-time search, in full-sample period numbering.
struct DetectedBreak {
    BreakFit fit;
    WaldResult test;
    int segment_first = 1;  ///< first period of the segment it was found in
    int segment_last = 1;
};

/// A segment the search did not test.
struct SkippedSegment {
    int first = 1;
    int last = 1;
    std::string reason;
};

struct SequentialResult {
    std::vector<DetectedBreak> breaks;  ///< sorted by date
    std::vector<SkippedSegment> skipped;
    std::vector<std::pair<int, int>> tested_segments;
    std::vector<WaldResult> segment_tests;  ///< one per tested segment, same order
};

/**
 * @brief Test, date, split and repeat until no segment rejects or max_breaks are found.
 *
 * Errors on the full sample propagate; sub-segments that are too short for a trimmed
 * candidate set or fail numerically are recorded in `skipped`.
 */
SequentialResult sequential_breaks(const PanelData& panel, const BreakSpec& spec, const HacConfig& hac,
                                   double alpha, int max_breaks, CriticalValues& critical_values);

/// chi-squared(r) upper quantile.
double chi2_critical(int r, double alpha);

}  // namespace ccebreak
