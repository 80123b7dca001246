#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ccebreak/error.hpp"
#include "ccebreak/panel.hpp"
#include "oracle.hpp"

using namespace ccebreak;

namespace {

std::vector<Observation> grid_rows(int n, int t, int k, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<Observation> rows;
    for (int i = 0; i < n; ++i) {
        for (int s = 0; s < t; ++s) {
            Observation o;
            o.unit = "u" + std::to_string(i);
            o.time = std::to_string(s + 1);
            o.y = z(rng);
            for (int j = 0; j < k; ++j) o.x.push_back(z(rng));
            rows.push_back(o);
        }
    }
    return rows;
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::internal;
}

}  // namespace

TEST_CASE("build_panel: minimal complete panel") {
    auto rows = grid_rows(2, 3, 1);
    const PanelData p = build_panel(rows, {});
    CHECK(p.n_units() == 2);
    CHECK(p.n_periods() == 3);
    CHECK(p.n_common() == 1);
    CHECK(p.d().col(0).isOnes());
    CHECK(p.d_names().front() == "(intercept)");
    CHECK(p.y()(0) == rows[0].y);
}

TEST_CASE("build_panel: missing pair is unbalanced") {
    auto rows = grid_rows(2, 3, 1);
    rows.pop_back();
    CHECK(code_of([&] { build_panel(rows, {}); }) == Errc::unbalanced_panel);
}

TEST_CASE("build_panel: duplicate, ragged and non-finite rows") {
    auto rows = grid_rows(2, 3, 2);
    auto dup = rows;
    dup.push_back(rows[1]);
    CHECK(code_of([&] { build_panel(dup, {}); }) == Errc::duplicate_observation);

    auto ragged = rows;
    ragged[3].x.pop_back();
    CHECK(code_of([&] { build_panel(ragged, {}); }) == Errc::ragged_row);

    auto nan = rows;
    nan[2].x[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK(code_of([&] { build_panel(nan, {}); }) == Errc::non_finite_value);

    auto ties = rows;
    for (auto& r : ties) r.time = r.time == "1" ? "1.0" : r.time;
    ties.push_back(rows[0]);
    ties.back().time = "1";
    CHECK(code_of([&] { build_panel(ties, {}); }) == Errc::duplicate_observation);
}

TEST_CASE("build_panel: application-sized panel") {
    const PanelData p = build_panel(grid_rows(61, 38, 3), {});
    CHECK(p.n_units() == 61);
    CHECK(p.n_periods() == 38);
    CHECK(p.n_regressors() == 3);
}

TEST_CASE("build_panel: numeric times sort by value, lexical by bytes") {
    std::vector<Observation> rows;
    for (std::string u : {"b", "a"})
        for (std::string t : {"10", "9", "2"}) rows.push_back({u, t, 1.0, {std::stod(t)}, 0});
    const PanelData num = build_panel(rows, {});
    CHECK(num.time_labels() == std::vector<std::string>{"2", "9", "10"});
    CHECK(num.unit_labels() == std::vector<std::string>{"a", "b"});
    PanelOptions lex;
    lex.time_order = TimeOrder::lexical;
    CHECK(build_panel(rows, {}, lex).time_labels() == std::vector<std::string>{"10", "2", "9"});

    rows[0].time = "2021-03";
    CHECK(code_of([&] { build_panel(rows, {}); }) == Errc::parse_error);
}

TEST_CASE("build_panel: common regressors") {
    const auto rows = grid_rows(3, 4, 1);
    std::vector<CommonObservation> common;
    for (int t = 4; t >= 1; --t) common.push_back({std::to_string(t), {10.0 * t}, 0});
    const PanelData p = build_panel(rows, common);
    REQUIRE(p.n_common() == 2);
    for (int t = 0; t < 4; ++t) CHECK(p.d()(t, 1) == 10.0 * (t + 1));

    PanelOptions none;
    none.intercept = false;
    CHECK(build_panel(rows, common, none).n_common() == 1);

    auto missing = common;
    missing.pop_back();
    CHECK(code_of([&] { build_panel(rows, missing); }) == Errc::unbalanced_panel);
    auto twice = common;
    twice.push_back(common[0]);
    CHECK(code_of([&] { build_panel(rows, twice); }) == Errc::duplicate_observation);
    auto unknown = common;
    unknown[0].time = "99";
    CHECK(code_of([&] { build_panel(rows, unknown); }) == Errc::unbalanced_panel);
}

TEST_CASE("build_panel is invariant to row order") {
    auto rows = grid_rows(5, 7, 2, 11);
    const PanelData ref = build_panel(rows, {});
    std::mt19937 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        std::shuffle(rows.begin(), rows.end(), rng);
        CHECK(build_panel(rows, {}) == ref);
    }
}

TEST_CASE("z_regressors: indicator examples") {
    const PanelData p = oracle::random_panel(3, 6, 2, 1, 5);
    BreakSpec spec{{0, 1}};
    const auto last = z_regressors(p, spec, 5);
    for (int i = 0; i < 3; ++i) {
        for (int t = 0; t < 6; ++t) {
            if (t == 5) {
                CHECK(last.row(i * 6 + t) == p.x().row(i * 6 + t));
            } else {
                CHECK(last.row(i * 6 + t).isZero(0.0));
            }
        }
    }
    CHECK(z_regressors(p, spec, 0) == p.x());
    CHECK_THROWS_AS(z_regressors(p, spec, 6), Error);
    CHECK_THROWS_AS(z_regressors(p, spec, -1), Error);
}

TEST_CASE("z_regressors: second coordinate after b = 1") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd x(4, 2);
    x << 3, 5, 3, 5, 3, 5, 3, 5;
    const PanelData p(2, 2, y, x, Eigen::MatrixXd(), {}, {});
    const auto z = z_regressors(p, BreakSpec{{1}}, 1);
    REQUIRE(z.cols() == 1);
    CHECK(z(0, 0) == 0.0);
    CHECK(z(1, 0) == 5.0);
    CHECK(z(2, 0) == 0.0);
    CHECK(z(3, 0) == 5.0);
}

TEST_CASE("z_regressors: exhaustive indicator check on random panels") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        std::mt19937_64 rng(seed);
        const int N = 2 + static_cast<int>(rng() % 4);
        const int T = 2 + static_cast<int>(rng() % 8);
        const int k = 1 + static_cast<int>(rng() % 3);
        std::vector<std::size_t> cols(k);
        std::iota(cols.begin(), cols.end(), 0);
        std::shuffle(cols.begin(), cols.end(), rng);
        cols.resize(1 + rng() % k);
        const PanelData p = oracle::random_panel(N, T, k, 1, seed);
        const BreakSpec spec{cols};
        for (int b = 0; b < T; ++b) {
            const auto z = z_regressors(p, spec, b);
            for (int i = 0; i < N; ++i)
                for (int t = 0; t < T; ++t)
                    for (std::size_t c = 0; c < cols.size(); ++c) {
                        const double expect = t + 1 > b ? p.x()(i * T + t, cols[c]) : 0.0;
                        CHECK(z(i * T + t, c) == expect);
                    }
        }
    }
}

TEST_CASE("selection matrix round trip") {
    const PanelData p = oracle::random_panel(3, 4, 3, 1, 9);
    const BreakSpec spec{{2, 0}};
    const Eigen::MatrixXd R = spec.selection_matrix(3);
    CHECK(R.rows() == 3);
    CHECK(R.cols() == 2);
    CHECK(R.colwise().sum().isOnes());
    CHECK((R.transpose() * R).isIdentity());
    const Eigen::MatrixXd rx = p.x() * R;
    CHECK(rx == spec.select(p.x()));
    CHECK(rx.col(0) == p.x().col(2));
    CHECK(rx.col(1) == p.x().col(0));
}

TEST_CASE("BreakSpec validation") {
    CHECK_NOTHROW(BreakSpec{{0, 1}}.validate(2));
    CHECK_THROWS_AS(BreakSpec{{}}.validate(2), Error);
    CHECK_THROWS_AS(BreakSpec{{2}}.validate(2), Error);
    CHECK_THROWS_AS((BreakSpec{{1, 1}}.validate(2)), Error);
    CHECK_THROWS_AS((BreakSpec{{0}, 0.5}.validate(2)), Error);
    CHECK_THROWS_AS((BreakSpec{{0}, 0.0}.validate(2)), Error);
}

TEST_CASE("candidate dates") {
    const BreakSpec one{{0}};
    const BreakSpec two{{0, 1}};
    CHECK(one.candidate_dates(4, CandidateSet::full_range) == std::vector<int>{1, 2});
    CHECK(two.candidate_dates(6, CandidateSet::full_range) == std::vector<int>{2, 3});
    CHECK(two.candidate_dates(5, CandidateSet::full_range) == std::vector<int>{2});
    CHECK(two.candidate_dates(4, CandidateSet::full_range).empty());

    const auto trimmed = one.candidate_dates(38, CandidateSet::trimmed);
    REQUIRE(!trimmed.empty());
    CHECK(trimmed.front() == 5);
    CHECK(trimmed.back() == 32);
    CHECK(trimmed.size() == 28);

    // floor(0.15 * 20) is 3 even though 0.15 * 20 evaluates just below 3 in binary.
    CHECK(one.candidate_dates(20, CandidateSet::trimmed).front() == 3);
    CHECK(one.candidate_dates(20, CandidateSet::trimmed).back() == 17);
    // Tight T: the trimmed set is cut back to [r, T-r-1].
    const BreakSpec three{{0, 1, 2}, 0.05};
    CHECK(three.candidate_dates(10, CandidateSet::trimmed) == std::vector<int>{3, 4, 5, 6});
}

TEST_CASE("regime partition") {
    const auto p = partition_at(5, 2);
    CHECK(p.pre_periods == std::vector<int>{1, 2});
    CHECK(p.post_periods == std::vector<int>{3, 4, 5});
    CHECK_THROWS_AS(partition_at(5, 0), Error);
    CHECK_THROWS_AS(partition_at(5, 5), Error);
}

TEST_CASE("slice_periods keeps every unit's block") {
    const PanelData p = oracle::random_panel(3, 8, 2, 2, 4);
    const PanelData s = p.slice_periods(2, 5);
    CHECK(s.n_periods() == 4);
    CHECK(s.time_labels() == std::vector<std::string>{"3", "4", "5", "6"});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s.unit_y(i) == p.unit_y(i).segment(2, 4));
        CHECK(s.unit_x(i) == p.unit_x(i).middleRows(2, 4));
    }
    CHECK(s.d() == p.d().middleRows(2, 4));
    CHECK_THROWS_AS(p.slice_periods(5, 2), Error);
    CHECK_THROWS_AS(p.slice_periods(0, 8), Error);
}

TEST_CASE("post_break_rows zeroes the pre-break block") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(4, 2);
    const auto db = post_break_rows(d, 3);
    CHECK(db.topRows(3).isZero(0.0));
    CHECK(db.row(3).isOnes());
}
