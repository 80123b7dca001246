#include "ccebreak/dgp.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/seed_seq.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "ccebreak/error.hpp"

namespace ccebreak {

namespace {

using Engine = boost::random::mt19937_64;

[[noreturn]] void violation(const std::string& what) { throw Error(Errc::config_invariant_violation, what); }

std::string padded(const char* prefix, std::size_t i, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n).size());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
    return buf;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

void DgpConfig::validate() const {
    if (n_units < 2 || n_periods < 2) violation("need N >= 2 and T >= 2");
    if (k < 1) violation("need k >= 1");
    if (breaking.empty()) violation("at least one breaking regressor is required");
    std::set<std::size_t> seen;
    for (auto c : breaking) {
        if (c >= k) violation("breaking column " + std::to_string(c) + " is not a regressor");
        if (!seen.insert(c).second) violation("breaking columns must be distinct");
    }
    const std::size_t r = breaking.size();
    if (m > k) violation("m <= k is required for the averages to span the factors");
    if (require_testing_rank && m > r) violation("m <= r is required for the testing rank condition");
    if (static_cast<std::size_t>(beta.size()) != k) violation("beta must have k entries");
    if (static_cast<std::size_t>(delta.size()) != r) violation("delta must have r entries");
    if (!beta.allFinite() || !delta.allFinite()) violation("beta and delta must be finite");
    if (b0) {
        const long long lo = static_cast<long long>(r);
        const long long hi = static_cast<long long>(n_periods) - static_cast<long long>(r) - 1;
        if (*b0 < lo || *b0 > hi) {
            violation("b0 = " + std::to_string(*b0) + " is outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
        }
    }
    if (!(std::abs(factor_rho) < 1.0)) violation("|factor_rho| must be below 1");
    if (!(std::abs(eps_rho) < 1.0)) violation("|eps_rho| must be below 1");
    if (!(loading_dispersion >= 0.0) || !(v_scale >= 0.0)) violation("scales must be nonnegative");
    if (!(sigma2_low >= 0.0) || (heteroskedastic && !(sigma2_high >= sigma2_low))) {
        violation("need 0 <= sigma2_low <= sigma2_high");
    }
}

BreakSpec DgpConfig::break_spec(double trim_fraction) const { return BreakSpec{breaking, trim_fraction}; }

SimulatedPanel generate(const DgpConfig& c) {
    c.validate();
    const auto N = static_cast<Eigen::Index>(c.n_units);
    const auto T = static_cast<Eigen::Index>(c.n_periods);
    const auto k = static_cast<Eigen::Index>(c.k);
    const auto m = static_cast<Eigen::Index>(c.m);
    const auto n = static_cast<Eigen::Index>(c.n_known);

    boost::random::seed_seq seq{static_cast<std::uint32_t>(c.seed & 0xffffffffu),
                                static_cast<std::uint32_t>(c.seed >> 32), 0xD6E5u};
    Engine rng(seq);
    boost::random::normal_distribution<double> normal;
    auto draw = [&] { return normal(rng); };

    Truth truth;
    truth.beta = c.beta;
    truth.delta = c.delta;
    truth.b0 = c.b0;

    truth.factors.resize(T, m);
    for (Eigen::Index l = 0; l < m; ++l) {
        if (c.factor_process == FactorProcess::iid_normal) {
            for (Eigen::Index t = 0; t < T; ++t) truth.factors(t, l) = draw();
        } else {
            const double innov = std::sqrt(1.0 - c.factor_rho * c.factor_rho);
            double f = draw();
            for (Eigen::Index t = 0; t < T; ++t) {
                if (t > 0) f = c.factor_rho * f + innov * draw();
                truth.factors(t, l) = f;
            }
        }
    }

    Eigen::MatrixXd d(T, n);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index j = 0; j < n; ++j) d(t, j) = j == 0 ? 1.0 : draw();
    }

    Eigen::MatrixXd mean_gamma_x = Eigen::MatrixXd::Constant(m, k, 0.5);
    for (Eigen::Index l = 0; l < std::min(m, k); ++l) mean_gamma_x(l, l) = 1.0;
    mean_gamma_x *= c.loading_mean;

    const Eigen::MatrixXd R = c.break_spec().selection_matrix(c.k);
    Eigen::VectorXd y(N * T);
    Eigen::MatrixXd x(N * T, k);
    truth.gamma.resize(N, m);
    truth.sigma2.resize(N);
    boost::random::uniform_real_distribution<double> uniform(c.sigma2_low, c.heteroskedastic ? c.sigma2_high
                                                                                             : c.sigma2_low);
    const double disp = c.loading_dispersion;
    for (Eigen::Index i = 0; i < N; ++i) {
        Eigen::MatrixXd gx(m, k);
        for (Eigen::Index l = 0; l < m; ++l)
            for (Eigen::Index j = 0; j < k; ++j) gx(l, j) = mean_gamma_x(l, j) + disp * draw();
        Eigen::VectorXd g(m);
        for (Eigen::Index l = 0; l < m; ++l) g(l) = c.gamma_mean + disp * draw();
        Eigen::MatrixXd a_x(n, k);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index h = 0; h < k; ++h) a_x(j, h) = disp * draw();
        Eigen::VectorXd a_y(n);
        for (Eigen::Index j = 0; j < n; ++j) a_y(j) = c.gamma_mean + disp * draw();
        const double s2 = c.heteroskedastic ? uniform(rng) : c.sigma2_low;
        const double sd = std::sqrt(s2);

        truth.gamma.row(i) = g.transpose();
        truth.loadings_x.push_back(gx);
        truth.sigma2(i) = s2;

        const double eps_innov = std::sqrt(1.0 - c.eps_rho * c.eps_rho);
        double eps = sd * draw();
        for (Eigen::Index t = 0; t < T; ++t) {
            const Eigen::Index row = i * T + t;
            Eigen::RowVectorXd xt = truth.factors.row(t) * gx;
            if (n > 0) xt += d.row(t) * a_x;
            for (Eigen::Index j = 0; j < k; ++j) xt(j) += std::sqrt(c.v_scale) * draw();
            if (t > 0) eps = c.eps_rho * eps + eps_innov * sd * draw();
            double yt = xt.dot(c.beta) + truth.factors.row(t).dot(g) + eps;
            if (n > 0) yt += d.row(t).dot(a_y);
            if (c.b0 && t + 1 > *c.b0) yt += (xt * R).dot(c.delta);
            x.row(row) = xt;
            y(row) = yt;
        }
    }

    std::vector<std::string> units, times, x_names, d_names;
    for (std::size_t i = 0; i < c.n_units; ++i) units.push_back(padded("u", i + 1, c.n_units));
    for (std::size_t t = 0; t < c.n_periods; ++t) times.push_back(std::to_string(t + 1));
    for (std::size_t j = 0; j < c.k; ++j) x_names.push_back("x" + std::to_string(j + 1));
    for (std::size_t j = 0; j < c.n_known; ++j) d_names.push_back(j == 0 ? "(intercept)" : "d" + std::to_string(j));

    PanelData panel(c.n_units, c.n_periods, std::move(y), std::move(x), std::move(d), std::move(units),
                    std::move(times), std::move(x_names), std::move(d_names), TimeOrder::numeric);
    return {std::move(panel), std::move(truth)};
}

}  // namespace ccebreak
