#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ccebreak/dgp.hpp"
#include "ccebreak/error.hpp"
#include "ccebreak/projection.hpp"
#include "oracle.hpp"

using namespace ccebreak;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

}  // namespace

TEST_CASE("cross-sectional average") {
    const Eigen::MatrixXd one = gaussian(5, 2, 1);
    CHECK(cross_sectional_average(one, 5) == one);

    Eigen::MatrixXd mirrored(10, 2);
    mirrored << one, -one;
    CHECK(cross_sectional_average(mirrored, 5).isZero(0.0));

    Eigen::MatrixXd three(3, 1);
    three << 1, 2, 6;
    CHECK(cross_sectional_average(three, 1)(0, 0) == doctest::Approx(3.0));

    const PanelData p = oracle::random_panel(4, 6, 2, 1, 3);
    const Eigen::MatrixXd avg = cross_sectional_average(p);
    for (int t = 0; t < 6; ++t) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += p.x()(i * 6 + t, 1);
        CHECK(avg(t, 1) == doctest::Approx(s / 4).epsilon(1e-14));
    }
}

TEST_CASE("annihilator examples") {
    const Eigen::MatrixXd B = gaussian(8, 3, 2);
    const Projector M = Projector::annihilator(B);
    CHECK(M.effective_rank() == 3);
    CHECK(M.apply(B).norm() <= 1e-10 * B.norm());

    const Eigen::MatrixXd a = gaussian(8, 2, 3);
    const Projector id = Projector::annihilator(Eigen::MatrixXd(8, 0));
    CHECK(id.effective_rank() == 0);
    CHECK(id.apply(a) == a);
    CHECK(Projector(8).materialize().isIdentity(0.0));

    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 1);
    Eigen::VectorXd e1(2);
    e1 << 1, 0;
    const Eigen::MatrixXd demeaned = make_annihilator(ones).apply(e1);
    CHECK(demeaned(0, 0) == doctest::Approx(0.5));
    CHECK(demeaned(1, 0) == doctest::Approx(-0.5));
}

TEST_CASE("annihilator rejects non-finite bases") {
    Eigen::MatrixXd B = gaussian(4, 2, 4);
    B(1, 1) = std::numeric_limits<double>::infinity();
    try {
        Projector::annihilator(B);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_finite_input);
    }
}

TEST_CASE("rank-deficient bases use the pseudoinverse") {
    Eigen::MatrixXd B(7, 3);
    const Eigen::MatrixXd g = gaussian(7, 2, 5);
    B << g, g.col(0) * 2.0 - g.col(1);
    const Projector M = Projector::annihilator(B);
    CHECK(M.effective_rank() == 2);
    CHECK(M.apply(B).norm() <= 1e-10 * B.norm());
    const Eigen::MatrixXd m2 = Projector::annihilator(g).materialize();
    CHECK((M.materialize() - m2).norm() <= 1e-12);
}

TEST_CASE("annihilators are idempotent and symmetric") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Eigen::Index T = 2 + static_cast<Eigen::Index>(seed % 12);
        const Eigen::Index q = static_cast<Eigen::Index>(seed % 5);
        Eigen::MatrixXd B = gaussian(T, q, 100 + seed);
        if (q >= 2 && seed % 3 == 0) B.col(q - 1) = B.col(0) * 3.0;
        const Eigen::MatrixXd M = Projector::annihilator(B).materialize();
        CHECK((M * M - M).norm() <= 1e-10);
        CHECK((M - M.transpose()).norm() <= 1e-12);
        CHECK(Projector::annihilator(B).effective_rank() <= std::min(T, q));
    }
}

TEST_CASE("apply_stacked matches per-unit application") {
    const Eigen::MatrixXd B = gaussian(6, 2, 6);
    const Projector M = Projector::annihilator(B);
    const Eigen::MatrixXd stacked = gaussian(24, 3, 7);
    const Eigen::MatrixXd out = M.apply_stacked(stacked);
    for (int i = 0; i < 4; ++i) {
        const Eigen::MatrixXd ref = M.materialize() * stacked.middleRows(i * 6, 6);
        CHECK((out.middleRows(i * 6, 6) - ref).norm() <= 1e-12);
    }
}

TEST_CASE("stacked_ols examples") {
    const Eigen::MatrixXd X = gaussian(12, 2, 8);
    Eigen::Vector2d b(1.5, -2.0);
    const OlsFit exact = stacked_ols(X * b, X);
    CHECK(exact.ssr <= 1e-24);
    CHECK(oracle::relative_error(exact.coefficients, b) <= 1e-12);

    Eigen::VectorXd y = gaussian(12, 1, 9);
    const OlsFit mean = stacked_ols(y, Eigen::MatrixXd::Ones(12, 1));
    CHECK(mean.coefficients(0) == doctest::Approx(y.mean()).epsilon(1e-13));

    const OlsFit fit = stacked_ols(y, X);
    const Eigen::Vector2d normal = (X.transpose() * X).inverse() * (X.transpose() * y);
    CHECK(oracle::relative_error(fit.coefficients, normal) <= 1e-8);
    CHECK((X.transpose() * fit.residuals).norm() <= 1e-8 * X.norm() * y.norm());
    CHECK(fit.ssr == doctest::Approx(fit.residuals.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("stacked_ols rejects rank-deficient designs") {
    Eigen::MatrixXd X = gaussian(10, 3, 10);
    X.col(2) = X.col(0) - 4.0 * X.col(1);
    const Eigen::VectorXd y = gaussian(10, 1, 11);
    auto code = [&](const Eigen::MatrixXd& design) {
        try {
            stacked_ols(y, design);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::internal;
    };
    CHECK(code(X) == Errc::rank_deficient_design);
    X.col(2).setZero();
    CHECK(code(X) == Errc::rank_deficient_design);
    // Rank decisions ignore units of measurement.
    Eigen::MatrixXd scaled = gaussian(10, 2, 12);
    scaled.col(1) *= 1e-9;
    CHECK(code(scaled) == Errc::internal);
}

TEST_CASE("Frisch-Waugh: partialled regression equals the joint one") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Eigen::MatrixXd X = gaussian(15, 2, 200 + seed);
        const Eigen::MatrixXd B = gaussian(15, 3, 300 + seed);
        const Eigen::VectorXd y = gaussian(15, 1, 400 + seed);
        const Projector M = Projector::annihilator(B);
        const OlsFit two_step = stacked_ols(M.apply(y), M.apply(X));
        Eigen::MatrixXd joint(15, 5);
        joint << X, B;
        const OlsFit full = stacked_ols(y, joint);
        CHECK(oracle::relative_error(two_step.coefficients, Eigen::VectorXd(full.coefficients.head(2))) <= 1e-8);
        CHECK(oracle::relative_error(two_step.ssr, full.ssr) <= 1e-8);
    }
}

TEST_CASE("compensated sum of squares") {
    std::vector<double> v(1000001, 1e-4);
    v[0] = 1e4;
    const double expect = 1e8 + 1e6 * 1e-8;
    CHECK(compensated_sum_of_squares(v) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(compensated_sum_of_squares(std::vector<double>{}) == 0.0);
    Eigen::VectorXd e(3);
    e << 1, -2, 2;
    CHECK(compensated_sum_of_squares(e) == 9.0);
}

TEST_CASE("principal angles") {
    const Eigen::MatrixXd a = gaussian(10, 2, 13);
    Eigen::Matrix2d rot;
    rot << 2, 1, -1, 3;
    CHECK(largest_principal_angle(a, a * rot) <= 1e-7);
    Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(3, 1);
    Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(3, 1);
    e1(0, 0) = 1;
    e2(1, 0) = 1;
    CHECK(largest_principal_angle(e1, e2) == doctest::Approx(std::acos(0.0)));
}

TEST_CASE("averages become rotationally consistent as N grows") {
    double prev = 10.0;
    for (std::size_t n : {50, 200, 800}) {
        std::vector<double> angles;
        for (std::uint64_t rep = 0; rep < 40; ++rep) {
            DgpConfig cfg;
            cfg.n_units = n;
            cfg.n_periods = 20;
            cfg.seed = 1000 + rep;
            const auto sim = generate(cfg);
            angles.push_back(largest_principal_angle(cross_sectional_average(sim.panel), sim.truth.factors));
        }
        std::nth_element(angles.begin(), angles.begin() + 20, angles.end());
        const double median = angles[20];
        CHECK(median < prev);
        prev = median;
    }
}
