#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ccebreak {

/// How time labels are ordered. Labels must be strictly increasing under the declared order;
/// ties are an error.
enum class TimeOrder {
    numeric,  ///< labels parse as real numbers and sort by value
    lexical,  ///< labels sort as byte strings (ISO dates work)
};

/**
 * @brief Balanced N x T panel with k regressors and n known common regressors.
 *
 * Storage is unit-major: observation (i, t) sits at row i*T + t of y() and x(), with
 * periods indexed 0..T-1 internally (period t+1 in the break-date convention). The
 * known common regressors d() are T x n and may have zero columns.
 *
 * Immutable after construction; safe to share across threads.
 */
class PanelData {
public:
    PanelData(std::size_t n_units, std::size_t n_periods, Eigen::VectorXd y, Eigen::MatrixXd x,
              Eigen::MatrixXd d, std::vector<std::string> unit_labels,
              std::vector<std::string> time_labels, std::vector<std::string> x_names = {},
              std::vector<std::string> d_names = {}, TimeOrder time_order = TimeOrder::numeric);

    std::size_t n_units() const noexcept { return n_units_; }
    std::size_t n_periods() const noexcept { return n_periods_; }
    std::size_t n_regressors() const noexcept { return static_cast<std::size_t>(x_.cols()); }
    std::size_t n_common() const noexcept { return static_cast<std::size_t>(d_.cols()); }

    const Eigen::VectorXd& y() const noexcept { return y_; }
    const Eigen::MatrixXd& x() const noexcept { return x_; }
    const Eigen::MatrixXd& d() const noexcept { return d_; }

    /// T x 1 outcome block of unit i.
    Eigen::VectorXd unit_y(std::size_t i) const;
    /// T x k regressor block X_i.
    Eigen::MatrixXd unit_x(std::size_t i) const;

    const std::vector<std::string>& unit_labels() const noexcept { return unit_labels_; }
    const std::vector<std::string>& time_labels() const noexcept { return time_labels_; }
    const std::vector<std::string>& x_names() const noexcept { return x_names_; }
    const std::vector<std::string>& d_names() const noexcept { return d_names_; }
    TimeOrder time_order() const noexcept { return time_order_; }

    /// Sub-panel keeping periods first..last (0-based, inclusive) for every unit.
    PanelData slice_periods(std::size_t first, std::size_t last) const;

    bool operator==(const PanelData& other) const;

private:
    std::size_t n_units_;
    std::size_t n_periods_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
    Eigen::MatrixXd d_;
    std::vector<std::string> unit_labels_;
    std::vector<std::string> time_labels_;
    std::vector<std::string> x_names_;
    std::vector<std::string> d_names_;
    TimeOrder time_order_;
};

/// Which candidate set a break date is drawn from.
enum class CandidateSet {
    full_range,  ///< [r, T-r-1], used when dating a break
    trimmed,     ///< floor(eps*T) <= b <= floor((1-eps)*T), used when testing
};

/**
 * @brief Which coefficients break and how the candidate dates are trimmed.
 *
 * `breaking` lists the regressor columns picked out by the selection matrix R, in the
 * order of R's columns.
 */
struct BreakSpec {
    std::vector<std::size_t> breaking;
    double trim_fraction = 0.15;

    std::size_t r() const noexcept { return breaking.size(); }

    /// Throws invalid_argument unless the columns are distinct, < k, and eps is in (0, 0.5).
    void validate(std::size_t k) const;

    /// The k x r 0/1 selection matrix R.
    Eigen::MatrixXd selection_matrix(std::size_t k) const;

    /// R'x for every row of a stacked regressor matrix.
    Eigen::MatrixXd select(const Eigen::MatrixXd& x) const;

    /// Candidate break dates for a sample of length T. The trimmed set is intersected with
    /// [1, T-1] and with [r, T-r-1] when the latter is the tighter bound.
    std::vector<int> candidate_dates(std::size_t n_periods, CandidateSet mode) const;
};

/// Periods 1..b form the pre-break regime and b+1..T the post-break regime.
struct RegimePartition {
    int break_date;
    std::vector<int> pre_periods;
    std::vector<int> post_periods;
};

RegimePartition partition_at(std::size_t n_periods, int break_date);

/// One long-format observation: y and the regressors of `unit` at `time`.
struct Observation {
    std::string unit;
    std::string time;
    double y = 0.0;
    std::vector<double> x;
    std::size_t line = 0;  ///< source line for diagnostics, 0 if unknown
};

/// One row of known common regressors.
struct CommonObservation {
    std::string time;
    std::vector<double> d;
    std::size_t line = 0;
};

struct PanelOptions {
    bool intercept = true;  ///< prepend an all-ones column to the known common regressors
    TimeOrder time_order = TimeOrder::numeric;
    std::vector<std::string> x_names;
    std::vector<std::string> d_names;
};

/**
 * @brief Assemble a balanced panel from long-format rows.
 *
 * Units are sorted by label and periods by the declared time order, so the result does not
 * depend on row order. Errors: UnbalancedPanel, DuplicateObservation, NonFiniteValue,
 * RaggedRow.
 */
PanelData build_panel(std::span<const Observation> rows, std::span<const CommonObservation> common,
                      const PanelOptions& options = {});

/// Stacked NT x r matrix z_{i,t}(b) = R'x_{i,t} 1(t > b), for b in [0, T-1].
Eigen::MatrixXd z_regressors(const PanelData& panel, const BreakSpec& spec, int break_date);

/// T x n matrix D(b): rows of D with t <= b set to zero.
Eigen::MatrixXd post_break_rows(const Eigen::MatrixXd& per_period, int break_date);

}  // namespace ccebreak
