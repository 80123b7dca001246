#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ccebreak {

/// Everything a run was configured with; echoed into its report.
struct RunConfig {
    std::string command = "detect";  ///< detect, test, estimate, ci, simulate, tables
    std::string input;
    std::string common_input;
    std::string unit_column = "unit";
    std::string time_column = "time";
    std::string y_column = "y";
    std::vector<std::string> x_columns;      ///< empty: every non-identifier column
    std::vector<std::string> break_columns;  ///< empty: every regressor
    bool intercept = true;
    std::string time_order = "numeric";  ///< numeric or lexical
    double alpha = 0.05;
    double trim = 0.15;
    std::string kernel = "bartlett";  ///< bartlett or uniform
    std::optional<int> bandwidth;     ///< empty: floor(T^(1/3))
    bool homoskedastic = false;
    int max_breaks = 5;
    std::uint64_t seed = 20210601;
    std::size_t n_paths = 200000;
    std::string cache;  ///< critical-value cache file; empty: the shipped one
    std::size_t threads = 1;
    std::string experiment_config;  ///< simulate: key = value file
    std::string write_panel;        ///< simulate: write one generated panel here instead
    int r_max = 6;                  ///< tables
    std::string out;
    std::string format = "json";

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// A break date: internal index b (last pre-break period, 1..T) and its time label.
struct DateRef {
    int index = 0;
    std::string label;
    bool operator==(const DateRef&) const = default;
};

struct CandidateValue {
    DateRef date;
    double wald = 0.0;
    bool operator==(const CandidateValue&) const = default;
};

struct TestSection {
    int segment_first = 1;
    int segment_last = 1;
    double sw = 0.0;
    double sw_critical = 0.0;
    double chi2_critical = 0.0;
    bool reject = false;
    DateRef argmax_date;
    double trim = 0.15;
    double alpha = 0.05;
    int r = 0;
    std::string kernel;
    int bandwidth = 0;
    bool homoskedastic = false;
    std::vector<CandidateValue> candidates;
    std::vector<DateRef> excluded;
    bool operator==(const TestSection&) const = default;
};

struct CoefficientRow {
    std::string name;
    std::string kind;  ///< beta (pre-break) or delta (break size)
    double estimate = 0.0;
    double std_error = 0.0;
    bool operator==(const CoefficientRow&) const = default;
};

struct BreakSection {
    int segment_first = 1;
    int segment_last = 1;
    DateRef b_hat;
    DateRef ci_lower;
    DateRef ci_upper;
    bool ci_clamped = false;
    double alpha = 0.05;
    double c_alpha = 0.0;
    std::optional<double> sw;  ///< sup-Wald of the segment the break was found in
    std::vector<CoefficientRow> coefficients;
    std::vector<double> ssr_profile;  ///< SSR(b) over the candidate dates
    std::vector<int> ssr_dates;
    bool operator==(const BreakSection&) const = default;
};

struct SkippedSection {
    int first = 1;
    int last = 1;
    std::string reason;
    bool operator==(const SkippedSection&) const = default;
};

/// Structured warning; `code` is a stable identifier downstream tools can gate on.
struct Warning {
    std::string code;   ///< ci_clamped, candidate_excluded, segment_skipped
    std::string stage;  ///< test, estimate, sequential
    std::string detail;
    std::optional<int> date;
    bool operator==(const Warning&) const = default;
};

struct DataSummary {
    std::size_t n_units = 0;
    std::size_t n_periods = 0;
    std::vector<std::string> regressors;
    std::vector<std::string> breaking;
    std::vector<std::string> common;
    std::string first_period;
    std::string last_period;
    bool operator==(const DataSummary&) const = default;
};

struct SimulationSummary {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    double argmax_step = 0.0;
    std::size_t bessel_points = 0;
    bool operator==(const SimulationSummary&) const = default;
};

struct Report {
    int schema_version = 1;
    std::string tool_version;
    RunConfig config;
    DataSummary data;
    SimulationSummary simulation;
    std::optional<TestSection> test;
    std::string decision;  ///< "break detected", "no break detected" or empty
    std::vector<BreakSection> breaks;
    std::vector<TestSection> segment_tests;
    std::vector<SkippedSection> skipped;
    std::vector<Warning> warnings;
    bool operator==(const Report&) const = default;
};

inline constexpr int kReportSchemaVersion = 1;

std::string report_to_json(const Report& report);
/// ParseError on malformed input or an unsupported schema_version.
Report report_from_json(const std::string& text);
std::string report_to_text(const Report& report);

std::string run_config_to_json(const RunConfig& config);

}  // namespace ccebreak
