#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccebreak/limit_dist.hpp"
#include "ccebreak/panel.hpp"
#include "ccebreak/projection.hpp"

namespace ccebreak {

/// Which factor proxies are projected out.
enum class ProjectionMode {
    estimation,  ///< (D, Xbar): used to date the break
    testing,     ///< (D, D(b), Xbar, Zbar(b)): used by the Wald tests and for theta
};

/// What stands in for the unobserved factors.
enum class FactorProxies {
    cce,         ///< cross-sectional averages plus the known common regressors
    known_only,  ///< only the known common regressors (ignores the factors)
};

/// T x q basis whose span is projected out at break date b.
Eigen::MatrixXd proxy_basis(const PanelData& panel, const BreakSpec& spec, int break_date,
                            ProjectionMode mode, FactorProxies proxies = FactorProxies::cce);

/// Ytilde, Xtilde, Ztilde(b) after projecting out the proxies unit by unit.
struct ProjectedRegression {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    Eigen::MatrixXd z;
    Eigen::Index n_periods = 0;
    Eigen::Index proxy_rank = 0;
    Eigen::VectorXd x_norms;  ///< column norms of X and Z(b) before projection
    Eigen::VectorXd z_norms;
};

ProjectedRegression project_regression(const PanelData& panel, const BreakSpec& spec, int break_date,
                                       ProjectionMode mode, FactorProxies proxies = FactorProxies::cce);

/**
 * @brief The two-step fit: partial Xtilde out of Ytilde and Ztilde(b), then regress.
 *
 * delta = (Z'M Z)^{-1} Z'M Y with M = M_{Xtilde}; residuals = M (Y - Z delta). Throws
 * RankDeficientDesign if Xtilde or M Ztilde lose rank, including a column that the
 * projections shrink below 1e-10 of its raw norm.
 */
struct PartialledFit {
    Eigen::VectorXd delta;
    Eigen::VectorXd residuals;       ///< NT
    Eigen::MatrixXd z_partialled;    ///< NT x r, M_{Xtilde} Ztilde(b)
    double ssr = 0.0;
};

PartialledFit fit_partialled(const ProjectedRegression& reg);

/// SSR(b) in the given projection mode.
double ssr_at(const PanelData& panel, const BreakSpec& spec, int break_date, ProjectionMode mode,
              FactorProxies proxies = FactorProxies::cce);

/// delta(b) in the given projection mode.
Eigen::VectorXd delta_at(const PanelData& panel, const BreakSpec& spec, int break_date,
                         ProjectionMode mode, FactorProxies proxies = FactorProxies::cce);

struct SsrProfile {
    std::vector<int> candidate_dates;
    std::vector<double> ssr_values;
    std::size_t argmin_index = 0;

    int b_hat() const { return candidate_dates.at(argmin_index); }
};

/// SSR(b) over B = [r, T-r-1]; b_hat is the smallest minimizing date. EmptyCandidateSet if B is empty.
SsrProfile estimate_breakpoint(const PanelData& panel, const BreakSpec& spec,
                               FactorProxies proxies = FactorProxies::cce);

/// The moment matrices scaling the argmax limit.
struct ScaleMoments {
    Eigen::MatrixXd omega_x;          ///< (NT)^-1 sum_i X_i'X_i
    Eigen::MatrixXd phi_x;            ///< (NT)^-1 sum_i sigma2_i X_i'X_i
    std::vector<double> sigma_eps_i;  ///< T^-1 eps_i'eps_i
};

ScaleMoments scale_moments(const PanelData& panel, const Eigen::VectorXd& residuals);

struct ConfidenceInterval {
    int lower = 0;
    int upper = 0;
    int half_width = 0;
    double critical_value = 0.0;  ///< c_alpha
    bool clamped = false;         ///< an endpoint was moved back into [1, T-1]
};

/// floor(c * d'R'Phi R d / (N (d'R'Omega R d)^2)) + 1, the unclamped half-width.
int ci_half_width(double critical_value, const Eigen::VectorXd& delta, const Eigen::MatrixXd& omega_x,
                  const Eigen::MatrixXd& phi_x, const BreakSpec& spec, std::size_t n_units);

/// Break-date interval around b_hat from the moments of the fit at b_hat.
ConfidenceInterval confidence_interval(const PanelData& panel, const BreakSpec& spec, int b_hat,
                                       const Eigen::VectorXd& delta_hat, double alpha,
                                       CriticalValues& critical_values);

/// Same, with c_alpha supplied and the moments already computed.
ConfidenceInterval confidence_interval(const PanelData& panel, const BreakSpec& spec, int b_hat,
                                       const Eigen::VectorXd& delta_hat, const ScaleMoments& moments,
                                       double critical_value);

/// theta = (beta', delta')' and its cluster-robust covariance.
struct ThetaEstimate {
    Eigen::VectorXd theta;
    Eigen::MatrixXd cov;

    Eigen::VectorXd standard_errors() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Regress M_{H(b)} y on M_{H(b)} W(b), W = (X, Z(b)), with the testing-mode proxies.
ThetaEstimate estimate_theta(const PanelData& panel, const BreakSpec& spec, int break_date);

struct BreakFit {
    int b_hat = 0;
    Eigen::VectorXd delta_hat;
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd theta_cov;
    Eigen::MatrixXd omega_x_hat;
    Eigen::MatrixXd phi_x_hat;
    std::vector<double> sigma_eps_i;
    int ci_lower = 0;
    int ci_upper = 0;
    bool ci_clamped = false;
    double alpha = 0.05;
    double critical_value = 0.0;
    SsrProfile profile;
    /// Why theta could not be estimated at b_hat (theta_hat is then empty), else empty.
    std::string theta_unidentified;
};

/// Date the break, build its interval, and estimate theta at b_hat. A b_hat so close to the
/// sample edge that the testing-mode projection leaves delta unidentified is not an error:
/// theta is left empty and the reason recorded.
BreakFit fit_break(const PanelData& panel, const BreakSpec& spec, double alpha,
                   CriticalValues& critical_values);

/// Throws RankDeficientDesign unless the raw stacked regressors have full column rank.
void require_full_rank_regressors(const PanelData& panel);

}  // namespace ccebreak
