#include "ccebreak/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ccebreak/error.hpp"

namespace ccebreak {

namespace {

std::string location(std::size_t line) {
    return line > 0 ? " (line " + std::to_string(line) + ")" : std::string{};
}

bool parse_number(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

// Sort key for time labels under the declared order.
struct TimeKey {
    double value = 0.0;
    std::string text;
};

TimeKey time_key(const std::string& label, TimeOrder order, std::size_t line) {
    TimeKey key{0.0, label};
    if (order == TimeOrder::numeric) {
        if (!parse_number(label, key.value) || !std::isfinite(key.value)) {
            throw Error(Errc::parse_error, "time label '" + label +
                                               "' is not numeric under the numeric time order" +
                                               location(line));
        }
    }
    return key;
}

bool time_less(const TimeKey& a, const TimeKey& b, TimeOrder order) {
    return order == TimeOrder::numeric ? a.value < b.value : a.text < b.text;
}

void require_finite(double v, const std::string& what, std::size_t line) {
    if (!std::isfinite(v)) {
        throw Error(Errc::non_finite_value, "non-finite " + what + location(line));
    }
}

}  // namespace

PanelData::PanelData(std::size_t n_units, std::size_t n_periods, Eigen::VectorXd y,
                     Eigen::MatrixXd x, Eigen::MatrixXd d, std::vector<std::string> unit_labels,
                     std::vector<std::string> time_labels, std::vector<std::string> x_names,
                     std::vector<std::string> d_names, TimeOrder time_order)
    : n_units_(n_units),
      n_periods_(n_periods),
      y_(std::move(y)),
      x_(std::move(x)),
      d_(std::move(d)),
      unit_labels_(std::move(unit_labels)),
      time_labels_(std::move(time_labels)),
      x_names_(std::move(x_names)),
      d_names_(std::move(d_names)),
      time_order_(time_order) {
    const auto nt = static_cast<Eigen::Index>(n_units_ * n_periods_);
    if (n_units_ < 2 || n_periods_ < 2) {
        throw Error(Errc::invalid_argument, "panel needs N >= 2 and T >= 2");
    }
    if (x_.cols() < 1) {
        throw Error(Errc::invalid_argument, "panel needs at least one regressor");
    }
    if (y_.size() != nt || x_.rows() != nt) {
        throw Error(Errc::invalid_argument, "y and x must have N*T rows");
    }
    if (d_.rows() != static_cast<Eigen::Index>(n_periods_)) {
        if (d_.size() == 0) {
            d_.resize(static_cast<Eigen::Index>(n_periods_), 0);
        } else {
            throw Error(Errc::invalid_argument, "d must have T rows");
        }
    }
    if (!y_.allFinite() || !x_.allFinite() || !d_.allFinite()) {
        throw Error(Errc::non_finite_value, "panel contains non-finite values");
    }
    if (unit_labels_.empty()) {
        for (std::size_t i = 0; i < n_units_; ++i) unit_labels_.push_back(std::to_string(i + 1));
    }
    if (time_labels_.empty()) {
        for (std::size_t t = 0; t < n_periods_; ++t) time_labels_.push_back(std::to_string(t + 1));
    }
    if (unit_labels_.size() != n_units_ || time_labels_.size() != n_periods_) {
        throw Error(Errc::invalid_argument, "label counts must match N and T");
    }
    if (x_names_.empty()) {
        for (Eigen::Index j = 0; j < x_.cols(); ++j) x_names_.push_back("x" + std::to_string(j + 1));
    }
    if (d_names_.empty()) {
        for (Eigen::Index j = 0; j < d_.cols(); ++j) d_names_.push_back("d" + std::to_string(j + 1));
    }
    if (x_names_.size() != static_cast<std::size_t>(x_.cols()) ||
        d_names_.size() != static_cast<std::size_t>(d_.cols())) {
        throw Error(Errc::invalid_argument, "column name counts must match x and d");
    }
    for (std::size_t t = 1; t < n_periods_; ++t) {
        const auto a = time_key(time_labels_[t - 1], time_order_, 0);
        const auto b = time_key(time_labels_[t], time_order_, 0);
        if (!time_less(a, b, time_order_)) {
            throw Error(Errc::invalid_argument, "time labels must be strictly increasing");
        }
    }
}

Eigen::VectorXd PanelData::unit_y(std::size_t i) const {
    const auto T = static_cast<Eigen::Index>(n_periods_);
    return y_.segment(static_cast<Eigen::Index>(i) * T, T);
}

Eigen::MatrixXd PanelData::unit_x(std::size_t i) const {
    const auto T = static_cast<Eigen::Index>(n_periods_);
    return x_.middleRows(static_cast<Eigen::Index>(i) * T, T);
}

PanelData PanelData::slice_periods(std::size_t first, std::size_t last) const {
    if (first > last || last >= n_periods_) {
        throw Error(Errc::invalid_argument, "invalid period slice");
    }
    const auto T = static_cast<Eigen::Index>(n_periods_);
    const auto len = static_cast<Eigen::Index>(last - first + 1);
    const auto N = static_cast<Eigen::Index>(n_units_);
    Eigen::VectorXd y(N * len);
    Eigen::MatrixXd x(N * len, x_.cols());
    for (Eigen::Index i = 0; i < N; ++i) {
        y.segment(i * len, len) = y_.segment(i * T + static_cast<Eigen::Index>(first), len);
        x.middleRows(i * len, len) = x_.middleRows(i * T + static_cast<Eigen::Index>(first), len);
    }
    Eigen::MatrixXd d = d_.middleRows(static_cast<Eigen::Index>(first), len);
    std::vector<std::string> times(time_labels_.begin() + static_cast<std::ptrdiff_t>(first),
                                   time_labels_.begin() + static_cast<std::ptrdiff_t>(last + 1));
    return PanelData(n_units_, static_cast<std::size_t>(len), std::move(y), std::move(x),
                     std::move(d), unit_labels_, std::move(times), x_names_, d_names_,
                     time_order_);
}

bool PanelData::operator==(const PanelData& o) const {
    return n_units_ == o.n_units_ && n_periods_ == o.n_periods_ && y_ == o.y_ &&
           x_.rows() == o.x_.rows() && x_.cols() == o.x_.cols() && x_ == o.x_ &&
           d_.rows() == o.d_.rows() && d_.cols() == o.d_.cols() && d_ == o.d_ &&
           unit_labels_ == o.unit_labels_ && time_labels_ == o.time_labels_ &&
           x_names_ == o.x_names_ && d_names_ == o.d_names_ && time_order_ == o.time_order_;
}

void BreakSpec::validate(std::size_t k) const {
    if (breaking.empty()) {
        throw Error(Errc::invalid_argument, "at least one breaking regressor is required");
    }
    if (breaking.size() > k) {
        throw Error(Errc::invalid_argument, "more breaking regressors than regressors");
    }
    std::set<std::size_t> seen;
    for (auto c : breaking) {
        if (c >= k) throw Error(Errc::invalid_argument, "breaking regressor index out of range");
        if (!seen.insert(c).second) {
            throw Error(Errc::invalid_argument, "breaking regressors must be distinct");
        }
    }
    if (!(trim_fraction > 0.0 && trim_fraction < 0.5)) {
        throw Error(Errc::invalid_argument, "trim fraction must lie in (0, 0.5)");
    }
}

Eigen::MatrixXd BreakSpec::selection_matrix(std::size_t k) const {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(breaking.size()));
    for (std::size_t c = 0; c < breaking.size(); ++c) {
        R(static_cast<Eigen::Index>(breaking[c]), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return R;
}

Eigen::MatrixXd BreakSpec::select(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(breaking.size()));
    for (std::size_t c = 0; c < breaking.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(breaking[c]));
    }
    return out;
}

std::vector<int> BreakSpec::candidate_dates(std::size_t n_periods, CandidateSet mode) const {
    const int T = static_cast<int>(n_periods);
    const int r = static_cast<int>(breaking.size());
    int lo = r;
    int hi = T - r - 1;
    if (mode == CandidateSet::trimmed) {
        // b = floor(tau*T) over tau in [eps, 1-eps] is exactly this integer range; the small
        // offset keeps products such as 0.15*20 from flooring to 2.
        const double slack = 1e-9;
        const int t_lo = static_cast<int>(std::floor(trim_fraction * T + slack));
        const int t_hi = static_cast<int>(std::floor((1.0 - trim_fraction) * T + slack));
        lo = std::max({lo, t_lo, 1});
        hi = std::min({hi, t_hi, T - 1});
    } else {
        lo = std::max(lo, 1);
    }
    std::vector<int> dates;
    for (int b = lo; b <= hi; ++b) dates.push_back(b);
    return dates;
}

RegimePartition partition_at(std::size_t n_periods, int break_date) {
    const int T = static_cast<int>(n_periods);
    if (break_date < 1 || break_date > T - 1) {
        throw Error(Errc::invalid_argument, "break date must lie in [1, T-1]");
    }
    RegimePartition p{break_date, {}, {}};
    for (int t = 1; t <= T; ++t) (t <= break_date ? p.pre_periods : p.post_periods).push_back(t);
    return p;
}

PanelData build_panel(std::span<const Observation> rows, std::span<const CommonObservation> common,
                      const PanelOptions& options) {
    if (rows.empty()) throw Error(Errc::unbalanced_panel, "no observations");
    const std::size_t k = rows.front().x.size();
    if (k == 0) throw Error(Errc::invalid_argument, "at least one regressor is required");

    std::set<std::string> units;
    std::map<std::string, TimeKey> times;
    for (const auto& row : rows) {
        if (row.x.size() != k) {
            throw Error(Errc::ragged_row, "expected " + std::to_string(k) + " regressors, got " +
                                              std::to_string(row.x.size()) + location(row.line));
        }
        require_finite(row.y, "outcome", row.line);
        for (double v : row.x) require_finite(v, "regressor", row.line);
        units.insert(row.unit);
        if (!times.count(row.time)) times.emplace(row.time, time_key(row.time, options.time_order, row.line));
    }

    std::vector<std::string> time_labels;
    for (const auto& [label, key] : times) time_labels.push_back(label);
    std::sort(time_labels.begin(), time_labels.end(), [&](const auto& a, const auto& b) {
        return time_less(times.at(a), times.at(b), options.time_order);
    });
    for (std::size_t t = 1; t < time_labels.size(); ++t) {
        if (!time_less(times.at(time_labels[t - 1]), times.at(time_labels[t]), options.time_order)) {
            throw Error(Errc::duplicate_observation, "time labels '" + time_labels[t - 1] + "' and '" +
                                                         time_labels[t] + "' tie under the time order");
        }
    }
    std::vector<std::string> unit_labels(units.begin(), units.end());

    std::map<std::string, std::size_t> unit_index;
    std::map<std::string, std::size_t> time_index;
    for (std::size_t i = 0; i < unit_labels.size(); ++i) unit_index[unit_labels[i]] = i;
    for (std::size_t t = 0; t < time_labels.size(); ++t) time_index[time_labels[t]] = t;

    const std::size_t N = unit_labels.size();
    const std::size_t T = time_labels.size();
    const auto Ti = static_cast<Eigen::Index>(T);
    Eigen::VectorXd y(static_cast<Eigen::Index>(N * T));
    Eigen::MatrixXd x(static_cast<Eigen::Index>(N * T), static_cast<Eigen::Index>(k));
    std::vector<char> filled(N * T, 0);
    for (const auto& row : rows) {
        const std::size_t i = unit_index.at(row.unit);
        const std::size_t t = time_index.at(row.time);
        const std::size_t pos = i * T + t;
        if (filled[pos]) {
            throw Error(Errc::duplicate_observation, "duplicate observation for unit '" + row.unit +
                                                         "' at time '" + row.time + "'" + location(row.line));
        }
        filled[pos] = 1;
        const auto r = static_cast<Eigen::Index>(pos);
        y(r) = row.y;
        for (std::size_t j = 0; j < k; ++j) x(r, static_cast<Eigen::Index>(j)) = row.x[j];
    }
    for (std::size_t pos = 0; pos < filled.size(); ++pos) {
        if (!filled[pos]) {
            throw Error(Errc::unbalanced_panel, "unit '" + unit_labels[pos / T] +
                                                    "' is not observed at time '" +
                                                    time_labels[pos % T] + "'");
        }
    }

    std::size_t n_known = 0;
    if (!common.empty()) n_known = common.front().d.size();
    for (const auto& row : common) {
        if (row.d.size() != n_known) {
            throw Error(Errc::ragged_row, "expected " + std::to_string(n_known) +
                                              " common regressors" + location(row.line));
        }
    }
    const std::size_t offset = options.intercept ? 1 : 0;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(Ti, static_cast<Eigen::Index>(n_known + offset));
    if (options.intercept) d.col(0).setOnes();
    if (!common.empty()) {
        std::vector<char> seen(T, 0);
        for (const auto& row : common) {
            auto it = time_index.find(row.time);
            if (it == time_index.end()) {
                throw Error(Errc::unbalanced_panel, "common regressors given for unknown time '" +
                                                        row.time + "'" + location(row.line));
            }
            if (seen[it->second]) {
                throw Error(Errc::duplicate_observation,
                            "duplicate common regressors at time '" + row.time + "'" + location(row.line));
            }
            seen[it->second] = 1;
            for (std::size_t j = 0; j < n_known; ++j) {
                require_finite(row.d[j], "common regressor", row.line);
                d(static_cast<Eigen::Index>(it->second), static_cast<Eigen::Index>(j + offset)) = row.d[j];
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            if (!seen[t]) {
                throw Error(Errc::unbalanced_panel,
                            "common regressors missing at time '" + time_labels[t] + "'");
            }
        }
    }

    std::vector<std::string> x_names = options.x_names;
    if (x_names.size() != k) {
        x_names.clear();
        for (std::size_t j = 0; j < k; ++j) x_names.push_back("x" + std::to_string(j + 1));
    }
    std::vector<std::string> d_names;
    if (options.intercept) d_names.push_back("(intercept)");
    if (options.d_names.size() == n_known) {
        d_names.insert(d_names.end(), options.d_names.begin(), options.d_names.end());
    } else {
        for (std::size_t j = 0; j < n_known; ++j) d_names.push_back("d" + std::to_string(j + 1));
    }
    return PanelData(N, T, std::move(y), std::move(x), std::move(d), std::move(unit_labels),
                     std::move(time_labels), std::move(x_names), std::move(d_names),
                     options.time_order);
}

Eigen::MatrixXd z_regressors(const PanelData& panel, const BreakSpec& spec, int break_date) {
    const auto T = static_cast<Eigen::Index>(panel.n_periods());
    if (break_date < 0 || break_date > T - 1) {
        throw Error(Errc::invalid_argument, "break date must lie in [0, T-1]");
    }
    Eigen::MatrixXd z = spec.select(panel.x());
    const auto N = static_cast<Eigen::Index>(panel.n_units());
    for (Eigen::Index i = 0; i < N; ++i) z.middleRows(i * T, break_date).setZero();
    return z;
}

Eigen::MatrixXd post_break_rows(const Eigen::MatrixXd& per_period, int break_date) {
    Eigen::MatrixXd out = per_period;
    out.topRows(std::clamp<Eigen::Index>(break_date, 0, out.rows())).setZero();
    return out;
}

}  // namespace ccebreak
