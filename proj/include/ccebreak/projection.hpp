#pragma once

#include <span>

#include <Eigen/Dense>

#include "ccebreak/panel.hpp"

namespace ccebreak {

/// T x k matrix of cross-sectional averages; row t is N^-1 sum_i x_{i,t}.
Eigen::MatrixXd cross_sectional_average(const PanelData& panel);

/// Cross-sectional average of any unit-major stacked NT x c matrix.
Eigen::MatrixXd cross_sectional_average(const Eigen::MatrixXd& stacked, Eigen::Index n_periods);

/**
 * @brief Residual maker M_B = I - B (B'B)^+ B' for a T x q basis B.
 *
 * The pseudoinverse comes from an SVD of B with singular values below
 * max(T, q) * eps * sigma_max dropped, so rank-deficient bases (redundant averages) are
 * fine. Only an orthonormal basis of span(B) is stored; the T x T matrix is never formed
 * except by materialize().
 */
class Projector {
public:
    /// Identity map on R^T.
    explicit Projector(Eigen::Index n_periods);

    /// Projects out the column span of `basis`. Throws NonFiniteInput on NaN / Inf.
    static Projector annihilator(const Eigen::MatrixXd& basis);

    Eigen::Index n_periods() const noexcept { return n_periods_; }
    Eigen::Index effective_rank() const noexcept { return q_.cols(); }
    const Eigen::MatrixXd& orthonormal_basis() const noexcept { return q_; }

    /// M A for a T x c matrix.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& a) const;

    /// M applied to every T-row unit block of a unit-major stacked NT x c matrix.
    Eigen::MatrixXd apply_stacked(const Eigen::MatrixXd& stacked) const;

    /// The T x T matrix; for tests and diagnostics.
    Eigen::MatrixXd materialize() const;

private:
    Eigen::Index n_periods_;
    Eigen::MatrixXd q_;
};

inline Projector make_annihilator(const Eigen::MatrixXd& basis) { return Projector::annihilator(basis); }

/// Least-squares fit y ~ X.
struct OlsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd residuals;
    double ssr = 0.0;
};

/**
 * @brief Least squares with a reusable rank-revealing QR of the design.
 *
 * Columns are scaled to unit norm before the column-pivoted QR so the rank decision does
 * not depend on units of measurement. A pivot below 1e-10 of the largest marks the design
 * rank deficient (RankDeficientDesign).
 */
class LeastSquares {
public:
    explicit LeastSquares(const Eigen::MatrixXd& design);

    Eigen::Index n_params() const noexcept { return scale_.size(); }

    Eigen::MatrixXd coefficients(const Eigen::MatrixXd& responses) const;
    /// (I - X X^+) Y.
    Eigen::MatrixXd residuals(const Eigen::MatrixXd& responses) const;

private:
    Eigen::MatrixXd design_;
    Eigen::VectorXd scale_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

/// Stacked OLS of an NT response on NT x p regressors with compensated SSR accumulation.
OlsFit stacked_ols(const Eigen::VectorXd& responses, const Eigen::MatrixXd& regressors);

/// Sum of squares with Neumaier compensation.
double compensated_sum_of_squares(std::span<const double> values);

inline double compensated_sum_of_squares(const Eigen::VectorXd& v) {
    return compensated_sum_of_squares(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

/// Largest principal angle (radians) between span(a) and span(b), both with T rows.
double largest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace ccebreak
