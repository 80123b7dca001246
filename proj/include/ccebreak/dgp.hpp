#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ccebreak/panel.hpp"

namespace ccebreak {

enum class FactorProcess {
    iid_normal,
    ar1,  ///< f_t = rho f_{t-1} + sqrt(1 - rho^2) u_t, started from the stationary law
};

/**
 * @brief Synthetic interactive-effects panel with a common break.
 *
 *   x_{i,t} = A_i'd_t + Gamma_i'f_t + v_{i,t}
 *   y_{i,t} = alpha_i'd_t + beta'x_{i,t} + delta'R'x_{i,t} 1(t > b0) + gamma_i'f_t + eps_{i,t}
 *
 * Loadings are mean + loading_dispersion * N(0, 1), drawn independently per unit. The mean
 * of Gamma_i is loading_mean * G with G = 0.5 (ones + I), which has rank m when m <= k.
 * The mean of gamma_i and alpha_i is gamma_mean * ones and the mean of A_i is zero.
 * d_t holds an intercept followed by n_known - 1 iid N(0, 1) series.
 */
struct DgpConfig {
    std::size_t n_units = 200;
    std::size_t n_periods = 10;
    std::size_t k = 1;
    std::vector<std::size_t> breaking{0};  ///< columns of R
    std::size_t m = 1;                     ///< number of unobserved factors
    std::size_t n_known = 0;               ///< known common regressors, the first one the intercept

    Eigen::VectorXd beta = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
    std::optional<int> b0;  ///< last pre-break period; empty for no break

    FactorProcess factor_process = FactorProcess::ar1;
    double factor_rho = 0.5;
    double loading_mean = 1.0;
    double gamma_mean = 1.0;
    double loading_dispersion = 0.5;

    bool heteroskedastic = true;  ///< sigma2_i ~ U[sigma2_low, sigma2_high], else sigma2_low for all
    double sigma2_low = 0.5;
    double sigma2_high = 1.5;
    double eps_rho = 0.0;  ///< AR(1) coefficient of eps_{i,t}
    double v_scale = 1.0;  ///< Sigma_v = v_scale * I

    std::uint64_t seed = 1;
    bool require_testing_rank = false;  ///< also enforce m <= r

    /// Throws ConfigInvariantViolation on inconsistent settings.
    void validate() const;
    BreakSpec break_spec(double trim_fraction = 0.15) const;
};

/// What generated a simulated panel. Kept apart from the panel so estimators never see it.
struct Truth {
    Eigen::MatrixXd factors;         ///< T x m
    Eigen::MatrixXd gamma;           ///< N x m
    std::vector<Eigen::MatrixXd> loadings_x;  ///< N blocks of m x k
    Eigen::VectorXd sigma2;          ///< N
    Eigen::VectorXd beta;
    Eigen::VectorXd delta;
    std::optional<int> b0;
};

struct SimulatedPanel {
    PanelData panel;
    Truth truth;
};

/// Deterministic in config.seed.
SimulatedPanel generate(const DgpConfig& config);

/// splitmix64 step, used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace ccebreak
