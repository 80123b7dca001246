#include "ccebreak/wald.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <boost/math/distributions/chi_squared.hpp>

namespace ccebreak {

namespace {

constexpr double kEigenFloor = 1e-12;
constexpr double kResidualFloor = 1e-24;  // SSR relative to |Ytilde|^2, i.e. residuals at 1e-12

// Inverse-quadratic form v' S^-1 v via a symmetric eigendecomposition; eigenvalues below
// floor * trace / dim raise SingularCovariance.
double inverse_quadratic(const Eigen::MatrixXd& s, const Eigen::VectorXd& v, const char* what) {
    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw Error(Errc::singular_covariance, std::string(what) + ": eigensolver failed");
    const double trace = sym.trace();
    const double floor = kEigenFloor * trace / static_cast<double>(sym.rows());
    const auto& lambda = eig.eigenvalues();
    if (!(trace > 0.0) || lambda.minCoeff() <= floor) {
        throw Error(Errc::singular_covariance, std::string(what) + " is not invertible");
    }
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * v;
    return (proj.array().square() / lambda.array()).sum();
}

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& s, const char* what) {
    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const double floor = kEigenFloor * sym.trace() / static_cast<double>(sym.rows());
    if (eig.info() != Eigen::Success || !(sym.trace() > 0.0) || eig.eigenvalues().minCoeff() <= floor) {
        throw Error(Errc::singular_covariance, std::string(what) + " is not invertible");
    }
    return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

void shift_fit(BreakFit& fit, int offset) {
    fit.b_hat += offset;
    fit.ci_lower += offset;
    fit.ci_upper += offset;
    for (auto& b : fit.profile.candidate_dates) b += offset;
}

void shift_test(WaldResult& test, int offset) {
    test.argmax_date += offset;
    for (auto& b : test.candidate_dates) b += offset;
    for (auto& e : test.excluded) e.break_date += offset;
}

}  // namespace

double kernel_weight(Kernel kernel, double u) noexcept {
    const double a = std::abs(u);
    if (a > 1.0) return 0.0;
    return kernel == Kernel::bartlett ? 1.0 - a : 1.0;
}

int HacConfig::resolve_bandwidth(std::size_t n_periods) const {
    if (bandwidth) {
        if (*bandwidth < 1) throw Error(Errc::invalid_argument, "bandwidth must be at least 1");
        return *bandwidth;
    }
    // floor(T^(1/3)) with a guard against cbrt(27) = 2.9999...
    int s = static_cast<int>(std::floor(std::cbrt(static_cast<double>(n_periods)) + 1e-9));
    return std::max(s, 1);
}

Eigen::MatrixXd hac_long_run(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& z, Eigen::Index n_periods,
                             Kernel kernel, int bandwidth) {
    const Eigen::Index T = n_periods;
    const Eigen::Index N = z.rows() / T;
    const Eigen::Index r = z.cols();
    // Scores s_{i,t} = eps_{i,t} z_{i,t}.
    const Eigen::MatrixXd scores = z.array().colwise() * residuals.array();
    const double nt = static_cast<double>(N * T);
    Eigen::MatrixXd psi = (scores.transpose() * scores) / nt;
    for (Eigen::Index j = 1; j < T; ++j) {
        const double w = kernel_weight(kernel, static_cast<double>(j) / static_cast<double>(bandwidth));
        if (w == 0.0) continue;
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(r, r);
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto lead = scores.middleRows(i * T + j, T - j);
            const auto lag = scores.middleRows(i * T, T - j);
            gamma.noalias() += lead.transpose() * lag;
        }
        gamma /= nt;
        psi += w * (gamma + gamma.transpose());
    }
    return psi;
}

WaldPoint wald_detail(const PanelData& panel, const BreakSpec& spec, int break_date, const HacConfig& hac) {
    const ProjectedRegression reg = project_regression(panel, spec, break_date, ProjectionMode::testing);
    PartialledFit fit;
    try {
        fit = fit_partialled(reg);
    } catch (const Error& e) {
        if (e.code() != Errc::rank_deficient_design) throw;
        throw Error(Errc::rank_condition_failure,
                    "design loses rank after projecting out the factor proxies at b = " +
                        std::to_string(break_date) + ": " + e.what());
    }
    const double nt = static_cast<double>(reg.y.size());
    if (!(fit.ssr > kResidualFloor * reg.y.squaredNorm())) {
        throw Error(Errc::singular_covariance, "residuals vanish at b = " + std::to_string(break_date) +
                                                   ", so Sigma_delta(b) is zero");
    }
    WaldPoint out;
    out.break_date = break_date;
    out.delta = fit.delta;
    out.omega_v = (fit.z_partialled.transpose() * fit.z_partialled) / nt;
    const Eigen::MatrixXd omega_inv = inverse_spd(out.omega_v, "Omega_V(b)");
    if (hac.homoskedastic) {
        const double sigma2 = fit.ssr / nt;
        out.sigma_delta = sigma2 * omega_inv;
    } else {
        const Eigen::MatrixXd psi = hac_long_run(fit.residuals, fit.z_partialled, reg.n_periods, hac.kernel,
                                                 hac.resolve_bandwidth(panel.n_periods()));
        out.sigma_delta = omega_inv * psi * omega_inv;
    }
    out.sigma_delta = (0.5 * (out.sigma_delta + out.sigma_delta.transpose())).eval();
    out.wald = nt * inverse_quadratic(out.sigma_delta, out.delta, "Sigma_delta(b)");
    return out;
}

double wald_at(const PanelData& panel, const BreakSpec& spec, int break_date, const HacConfig& hac) {
    return wald_detail(panel, spec, break_date, hac).wald;
}

double chi2_critical(int r, double alpha) {
    if (r < 1) throw Error(Errc::invalid_argument, "r must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1)");
    return boost::math::quantile(boost::math::chi_squared(static_cast<double>(r)), 1.0 - alpha);
}

WaldResult sup_wald(const PanelData& panel, const BreakSpec& spec, const HacConfig& hac, double alpha,
                    CriticalValues& critical_values) {
    spec.validate(panel.n_regressors());
    require_full_rank_regressors(panel);
    WaldResult out;
    out.trim_fraction = spec.trim_fraction;
    out.alpha = alpha;
    out.r = static_cast<int>(spec.r());
    out.bandwidth = hac.resolve_bandwidth(panel.n_periods());
    const auto dates = spec.candidate_dates(panel.n_periods(), CandidateSet::trimmed);
    if (dates.empty()) throw Error(Errc::empty_candidate_set, "trimmed candidate set is empty");
    out.chi2_critical = chi2_critical(out.r, alpha);
    out.sw_critical = critical_values.sup_bessel(out.r, spec.trim_fraction, alpha);

    for (int b : dates) {
        try {
            const double w = wald_at(panel, spec, b, hac);
            out.candidate_dates.push_back(b);
            out.wald_values.push_back(w);
        } catch (const Error& e) {
            if (e.code() != Errc::rank_condition_failure && e.code() != Errc::singular_covariance) throw;
            out.excluded.push_back({b, e.code(), e.what()});
        }
    }
    if (out.wald_values.empty()) {
        const auto& first = out.excluded.front();
        throw Error(first.reason, "every candidate date failed; first at b = " + std::to_string(first.break_date) +
                                      ": " + first.detail);
    }
    const auto best = std::max_element(out.wald_values.begin(), out.wald_values.end());
    out.sw = *best;
    out.argmax_date = out.candidate_dates[static_cast<std::size_t>(best - out.wald_values.begin())];
    out.reject_sw = out.sw > out.sw_critical;
    return out;
}

SequentialResult sequential_breaks(const PanelData& panel, const BreakSpec& spec, const HacConfig& hac,
                                   double alpha, int max_breaks, CriticalValues& critical_values) {
    if (max_breaks < 1) throw Error(Errc::invalid_argument, "max_breaks must be at least 1");
    SequentialResult out;
    const int T = static_cast<int>(panel.n_periods());
    std::deque<std::pair<int, int>> pending{{1, T}};
    bool full_sample = true;
    while (!pending.empty() && static_cast<int>(out.breaks.size()) < max_breaks) {
        const auto [first, last] = pending.front();
        pending.pop_front();
        const int len = last - first + 1;
        const auto sub_len = static_cast<std::size_t>(std::max(len, 0));
        if (!full_sample && (len < 2 || spec.candidate_dates(sub_len, CandidateSet::trimmed).empty() ||
                             spec.candidate_dates(sub_len, CandidateSet::full_range).empty())) {
            out.skipped.push_back({first, last, "segment too short for a trimmed candidate set"});
            full_sample = false;
            continue;
        }
        try {
            const PanelData sub = (first == 1 && last == T)
                                      ? panel
                                      : panel.slice_periods(static_cast<std::size_t>(first - 1),
                                                            static_cast<std::size_t>(last - 1));
            WaldResult test = sup_wald(sub, spec, hac, alpha, critical_values);
            const int offset = first - 1;
            shift_test(test, offset);
            out.tested_segments.emplace_back(first, last);
            out.segment_tests.push_back(test);
            if (test.reject_sw) {
                BreakFit fit = fit_break(sub, spec, alpha, critical_values);
                shift_fit(fit, offset);
                const int b = fit.b_hat;
                out.breaks.push_back({std::move(fit), std::move(test), first, last});
                pending.emplace_back(first, b);
                pending.emplace_back(b + 1, last);
            }
        } catch (const Error& e) {
            if (full_sample || exit_status(e.code()) != 2) throw;
            out.skipped.push_back({first, last, std::string(to_string(e.code())) + ": " + e.what()});
        }
        full_sample = false;
    }
    std::sort(out.breaks.begin(), out.breaks.end(),
              [](const DetectedBreak& a, const DetectedBreak& b) { return a.fit.b_hat < b.fit.b_hat; });
    return out;
}

}  // namespace ccebreak
