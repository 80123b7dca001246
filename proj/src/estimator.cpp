#include "ccebreak/estimator.hpp"

#include <cmath>
#include <limits>

#include "ccebreak/error.hpp"

namespace ccebreak {

namespace {

Eigen::MatrixXd hcat(std::initializer_list<const Eigen::MatrixXd*> blocks, Eigen::Index rows) {
    Eigen::Index cols = 0;
    for (const auto* b : blocks) cols += b->cols();
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index at = 0;
    for (const auto* b : blocks) {
        out.middleCols(at, b->cols()) = *b;
        at += b->cols();
    }
    return out;
}

constexpr double kRetained = 1e-10;

// A column that the projections reduce to round-off is not identified, even though it
// looks fine to a QR of the unit-scaled design.
const Eigen::MatrixXd& require_retained(const Eigen::MatrixXd& projected, const Eigen::VectorXd& raw_norms,
                                        const char* what) {
    for (Eigen::Index j = 0; j < projected.cols(); ++j) {
        if (!(projected.col(j).norm() > kRetained * raw_norms(j))) {
            throw Error(Errc::rank_deficient_design, std::string(what) + " column " + std::to_string(j) +
                                                         " lies in the span of the projected-out proxies");
        }
    }
    return projected;
}

Eigen::VectorXd column_norms(const Eigen::MatrixXd& m) { return m.colwise().norm().transpose(); }

// M_{Xtilde}-partialled problem for a fixed Xtilde; reused across candidate dates.
class PartialOut {
public:
    PartialOut(const Eigen::MatrixXd& x_tilde, const Eigen::VectorXd& x_norms, const Eigen::VectorXd& y_tilde)
        : x_(require_retained(x_tilde, x_norms, "regressor")), y_partialled_(x_.residuals(y_tilde)) {}

    PartialledFit fit(const Eigen::MatrixXd& z_tilde, const Eigen::VectorXd& z_norms) const {
        PartialledFit out;
        out.z_partialled = x_.residuals(z_tilde);
        require_retained(out.z_partialled, z_norms, "break regressor");
        LeastSquares z(out.z_partialled);
        out.delta = z.coefficients(y_partialled_);
        out.residuals = y_partialled_ - out.z_partialled * out.delta;
        out.ssr = compensated_sum_of_squares(out.residuals);
        return out;
    }

private:
    LeastSquares x_;
    Eigen::VectorXd y_partialled_;
};

}  // namespace

Eigen::MatrixXd proxy_basis(const PanelData& panel, const BreakSpec& spec, int break_date,
                            ProjectionMode mode, FactorProxies proxies) {
    const auto T = static_cast<Eigen::Index>(panel.n_periods());
    const Eigen::MatrixXd& d = panel.d();
    if (mode == ProjectionMode::estimation) {
        if (proxies == FactorProxies::known_only) return d;
        const Eigen::MatrixXd xbar = cross_sectional_average(panel);
        return hcat({&d, &xbar}, T);
    }
    const Eigen::MatrixXd d_post = post_break_rows(d, break_date);
    if (proxies == FactorProxies::known_only) return hcat({&d, &d_post}, T);
    const Eigen::MatrixXd xbar = cross_sectional_average(panel);
    const Eigen::MatrixXd zbar = post_break_rows(spec.select(xbar), break_date);
    return hcat({&d, &d_post, &xbar, &zbar}, T);
}

ProjectedRegression project_regression(const PanelData& panel, const BreakSpec& spec, int break_date,
                                       ProjectionMode mode, FactorProxies proxies) {
    spec.validate(panel.n_regressors());
    const Projector m = Projector::annihilator(proxy_basis(panel, spec, break_date, mode, proxies));
    ProjectedRegression reg;
    reg.n_periods = static_cast<Eigen::Index>(panel.n_periods());
    reg.proxy_rank = m.effective_rank();
    const Eigen::MatrixXd z = z_regressors(panel, spec, break_date);
    reg.x_norms = column_norms(panel.x());
    reg.z_norms = column_norms(z);
    reg.y = m.apply_stacked(panel.y());
    reg.x = m.apply_stacked(panel.x());
    reg.z = m.apply_stacked(z);
    return reg;
}

PartialledFit fit_partialled(const ProjectedRegression& reg) {
    return PartialOut(reg.x, reg.x_norms, reg.y).fit(reg.z, reg.z_norms);
}

double ssr_at(const PanelData& panel, const BreakSpec& spec, int break_date, ProjectionMode mode,
              FactorProxies proxies) {
    return fit_partialled(project_regression(panel, spec, break_date, mode, proxies)).ssr;
}

Eigen::VectorXd delta_at(const PanelData& panel, const BreakSpec& spec, int break_date,
                         ProjectionMode mode, FactorProxies proxies) {
    return fit_partialled(project_regression(panel, spec, break_date, mode, proxies)).delta;
}

SsrProfile estimate_breakpoint(const PanelData& panel, const BreakSpec& spec, FactorProxies proxies) {
    spec.validate(panel.n_regressors());
    SsrProfile profile;
    profile.candidate_dates = spec.candidate_dates(panel.n_periods(), CandidateSet::full_range);
    if (profile.candidate_dates.empty()) {
        throw Error(Errc::empty_candidate_set, "no admissible break dates: need T >= 2r + 2");
    }
    // The estimation-mode projector does not depend on b.
    const Projector m =
        Projector::annihilator(proxy_basis(panel, spec, 0, ProjectionMode::estimation, proxies));
    const PartialOut partial(m.apply_stacked(panel.x()), column_norms(panel.x()), m.apply_stacked(panel.y()));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < profile.candidate_dates.size(); ++c) {
        const int b = profile.candidate_dates[c];
        const Eigen::MatrixXd z = z_regressors(panel, spec, b);
        const double ssr = partial.fit(m.apply_stacked(z), column_norms(z)).ssr;
        profile.ssr_values.push_back(ssr);
        if (ssr < best) {
            best = ssr;
            profile.argmin_index = c;
        }
    }
    return profile;
}

ScaleMoments scale_moments(const PanelData& panel, const Eigen::VectorXd& residuals) {
    const auto N = static_cast<Eigen::Index>(panel.n_units());
    const auto T = static_cast<Eigen::Index>(panel.n_periods());
    const auto k = static_cast<Eigen::Index>(panel.n_regressors());
    const double nt = static_cast<double>(N * T);
    ScaleMoments m;
    m.omega_x = Eigen::MatrixXd::Zero(k, k);
    m.phi_x = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto xi = panel.x().middleRows(i * T, T);
        const Eigen::MatrixXd xtx = xi.transpose() * xi;
        const double s2 = compensated_sum_of_squares(Eigen::VectorXd(residuals.segment(i * T, T))) /
                          static_cast<double>(T);
        m.sigma_eps_i.push_back(s2);
        m.omega_x += xtx;
        m.phi_x += s2 * xtx;
    }
    m.omega_x /= nt;
    m.phi_x /= nt;
    return m;
}

int ci_half_width(double critical_value, const Eigen::VectorXd& delta, const Eigen::MatrixXd& omega_x,
                  const Eigen::MatrixXd& phi_x, const BreakSpec& spec, std::size_t n_units) {
    if (delta.size() == 0 || delta.isZero(0.0)) {
        throw Error(Errc::zero_break_magnitude, "estimated break magnitude is zero; interval is unbounded");
    }
    const Eigen::MatrixXd R = spec.selection_matrix(static_cast<std::size_t>(omega_x.rows()));
    const double signal = delta.dot(R.transpose() * omega_x * R * delta);
    const double noise = delta.dot(R.transpose() * phi_x * R * delta);
    if (!(signal > 0.0) || !std::isfinite(signal)) {
        throw Error(Errc::degenerate_scale, "d'R'Omega R d is not positive");
    }
    const double scaled = critical_value * noise / (static_cast<double>(n_units) * signal * signal);
    const double width = std::floor(std::max(scaled, 0.0)) + 1.0;
    constexpr double cap = static_cast<double>(std::numeric_limits<int>::max() / 4);
    return static_cast<int>(std::min(width, cap));
}

ConfidenceInterval confidence_interval(const PanelData& panel, const BreakSpec& spec, int b_hat,
                                       const Eigen::VectorXd& delta_hat, const ScaleMoments& moments,
                                       double critical_value) {
    ConfidenceInterval ci;
    ci.critical_value = critical_value;
    ci.half_width = ci_half_width(critical_value, delta_hat, moments.omega_x, moments.phi_x, spec,
                                  panel.n_units());
    const int T = static_cast<int>(panel.n_periods());
    const long long lo = static_cast<long long>(b_hat) - ci.half_width;
    const long long hi = static_cast<long long>(b_hat) + ci.half_width;
    ci.lower = static_cast<int>(std::max<long long>(lo, 1));
    ci.upper = static_cast<int>(std::min<long long>(hi, T - 1));
    ci.clamped = lo < 1 || hi > T - 1;
    return ci;
}

ConfidenceInterval confidence_interval(const PanelData& panel, const BreakSpec& spec, int b_hat,
                                       const Eigen::VectorXd& delta_hat, double alpha,
                                       CriticalValues& critical_values) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1]");
    const auto fit = fit_partialled(project_regression(panel, spec, b_hat, ProjectionMode::estimation));
    const ScaleMoments moments = scale_moments(panel, fit.residuals);
    return confidence_interval(panel, spec, b_hat, delta_hat, moments, critical_values.argmax_c(alpha));
}

ThetaEstimate estimate_theta(const PanelData& panel, const BreakSpec& spec, int break_date) {
    const ProjectedRegression reg = project_regression(panel, spec, break_date, ProjectionMode::testing);
    const auto N = static_cast<Eigen::Index>(panel.n_units());
    const Eigen::Index T = reg.n_periods;
    fit_partialled(reg);  // identification checks of the two-step fit
    const Eigen::MatrixXd w = hcat({&reg.x, &reg.z}, reg.x.rows());
    const OlsFit ols = stacked_ols(reg.y, w);

    const Eigen::Index p = w.cols();
    const double n = static_cast<double>(N);
    const Eigen::MatrixXd omega = (w.transpose() * w) / n;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < N; ++i) {
        const Eigen::VectorXd score = w.middleRows(i * T, T).transpose() * ols.residuals.segment(i * T, T);
        phi += score * score.transpose();
    }
    phi /= n;
    const Eigen::LDLT<Eigen::MatrixXd> omega_ldlt(omega);
    const Eigen::MatrixXd half = omega_ldlt.solve(phi);
    Eigen::MatrixXd cov = omega_ldlt.solve(half.transpose()).transpose() / n;
    cov = (0.5 * (cov + cov.transpose())).eval();
    return {ols.coefficients, cov};
}

void require_full_rank_regressors(const PanelData& panel) {
    try {
        LeastSquares check(panel.x());
    } catch (const Error& e) {
        throw Error(Errc::rank_deficient_design, std::string("regressors are collinear: ") + e.what());
    }
}

BreakFit fit_break(const PanelData& panel, const BreakSpec& spec, double alpha,
                   CriticalValues& critical_values) {
    require_full_rank_regressors(panel);
    BreakFit fit;
    fit.alpha = alpha;
    fit.profile = estimate_breakpoint(panel, spec);
    fit.b_hat = fit.profile.b_hat();

    const auto at_b = fit_partialled(project_regression(panel, spec, fit.b_hat, ProjectionMode::estimation));
    fit.delta_hat = at_b.delta;
    ScaleMoments moments = scale_moments(panel, at_b.residuals);
    const ConfidenceInterval ci = confidence_interval(panel, spec, fit.b_hat, fit.delta_hat, moments,
                                                      critical_values.argmax_c(alpha));
    fit.ci_lower = ci.lower;
    fit.ci_upper = ci.upper;
    fit.ci_clamped = ci.clamped;
    fit.critical_value = ci.critical_value;
    fit.omega_x_hat = std::move(moments.omega_x);
    fit.phi_x_hat = std::move(moments.phi_x);
    fit.sigma_eps_i = std::move(moments.sigma_eps_i);

    try {
        const ThetaEstimate theta = estimate_theta(panel, spec, fit.b_hat);
        fit.theta_hat = theta.theta;
        fit.theta_cov = theta.cov;
    } catch (const Error& e) {
        if (e.code() != Errc::rank_deficient_design) throw;
        fit.theta_unidentified = e.what();
    }
    return fit;
}

}  // namespace ccebreak
