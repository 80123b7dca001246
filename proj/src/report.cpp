#include "ccebreak/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "ccebreak/error.hpp"

namespace ccebreak {

using nlohmann::json;

namespace {

json real(double v) { return std::isfinite(v) ? json(v) : json(); }

double get_real(const json& j, const char* key) {
    const json& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json();
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
    j = json{{"command", c.command},
             {"input", c.input},
             {"common_input", c.common_input},
             {"unit_column", c.unit_column},
             {"time_column", c.time_column},
             {"y_column", c.y_column},
             {"x_columns", c.x_columns},
             {"break_columns", c.break_columns},
             {"intercept", c.intercept},
             {"time_order", c.time_order},
             {"alpha", c.alpha},
             {"trim", c.trim},
             {"kernel", c.kernel},
             {"bandwidth", optional_json(c.bandwidth)},
             {"homoskedastic", c.homoskedastic},
             {"max_breaks", c.max_breaks},
             {"seed", c.seed},
             {"n_paths", c.n_paths},
             {"cache", c.cache},
             {"threads", c.threads},
             {"experiment_config", c.experiment_config},
             {"write_panel", c.write_panel},
             {"r_max", c.r_max},
             {"out", c.out},
             {"format", c.format}};
}

void from_json(const json& j, RunConfig& c) {
    j.at("command").get_to(c.command);
    j.at("input").get_to(c.input);
    j.at("common_input").get_to(c.common_input);
    j.at("unit_column").get_to(c.unit_column);
    j.at("time_column").get_to(c.time_column);
    j.at("y_column").get_to(c.y_column);
    j.at("x_columns").get_to(c.x_columns);
    j.at("break_columns").get_to(c.break_columns);
    j.at("intercept").get_to(c.intercept);
    j.at("time_order").get_to(c.time_order);
    c.alpha = get_real(j, "alpha");
    c.trim = get_real(j, "trim");
    j.at("kernel").get_to(c.kernel);
    c.bandwidth = get_optional<int>(j, "bandwidth");
    j.at("homoskedastic").get_to(c.homoskedastic);
    j.at("max_breaks").get_to(c.max_breaks);
    j.at("seed").get_to(c.seed);
    j.at("n_paths").get_to(c.n_paths);
    j.at("cache").get_to(c.cache);
    j.at("threads").get_to(c.threads);
    j.at("experiment_config").get_to(c.experiment_config);
    j.at("write_panel").get_to(c.write_panel);
    j.at("r_max").get_to(c.r_max);
    j.at("out").get_to(c.out);
    j.at("format").get_to(c.format);
}

void to_json(json& j, const DateRef& d) { j = json{{"index", d.index}, {"label", d.label}}; }
void from_json(const json& j, DateRef& d) {
    j.at("index").get_to(d.index);
    j.at("label").get_to(d.label);
}

void to_json(json& j, const CandidateValue& c) { j = json{{"date", c.date}, {"wald", real(c.wald)}}; }
void from_json(const json& j, CandidateValue& c) {
    j.at("date").get_to(c.date);
    c.wald = get_real(j, "wald");
}

void to_json(json& j, const TestSection& t) {
    j = json{{"segment", {t.segment_first, t.segment_last}},
             {"sw", real(t.sw)},
             {"sw_critical", real(t.sw_critical)},
             {"chi2_critical", real(t.chi2_critical)},
             {"reject", t.reject},
             {"argmax_date", t.argmax_date},
             {"trim", real(t.trim)},
             {"alpha", real(t.alpha)},
             {"r", t.r},
             {"kernel", t.kernel},
             {"bandwidth", t.bandwidth},
             {"homoskedastic", t.homoskedastic},
             {"candidates", t.candidates},
             {"excluded", t.excluded}};
}
void from_json(const json& j, TestSection& t) {
    t.segment_first = j.at("segment").at(0).get<int>();
    t.segment_last = j.at("segment").at(1).get<int>();
    t.sw = get_real(j, "sw");
    t.sw_critical = get_real(j, "sw_critical");
    t.chi2_critical = get_real(j, "chi2_critical");
    j.at("reject").get_to(t.reject);
    j.at("argmax_date").get_to(t.argmax_date);
    t.trim = get_real(j, "trim");
    t.alpha = get_real(j, "alpha");
    j.at("r").get_to(t.r);
    j.at("kernel").get_to(t.kernel);
    j.at("bandwidth").get_to(t.bandwidth);
    j.at("homoskedastic").get_to(t.homoskedastic);
    j.at("candidates").get_to(t.candidates);
    j.at("excluded").get_to(t.excluded);
}

void to_json(json& j, const CoefficientRow& c) {
    j = json{{"name", c.name}, {"kind", c.kind}, {"estimate", real(c.estimate)}, {"std_error", real(c.std_error)}};
}
void from_json(const json& j, CoefficientRow& c) {
    j.at("name").get_to(c.name);
    j.at("kind").get_to(c.kind);
    c.estimate = get_real(j, "estimate");
    c.std_error = get_real(j, "std_error");
}

void to_json(json& j, const BreakSection& b) {
    json ssr = json::array();
    for (double v : b.ssr_profile) ssr.push_back(real(v));
    j = json{{"segment", {b.segment_first, b.segment_last}},
             {"b_hat", b.b_hat},
             {"ci", {{"lower", b.ci_lower}, {"upper", b.ci_upper}, {"clamped", b.ci_clamped}}},
             {"alpha", real(b.alpha)},
             {"c_alpha", real(b.c_alpha)},
             {"sw", b.sw ? real(*b.sw) : json()},
             {"coefficients", b.coefficients},
             {"ssr_profile", {{"dates", b.ssr_dates}, {"ssr", ssr}}}};
}
void from_json(const json& j, BreakSection& b) {
    b.segment_first = j.at("segment").at(0).get<int>();
    b.segment_last = j.at("segment").at(1).get<int>();
    j.at("b_hat").get_to(b.b_hat);
    const json& ci = j.at("ci");
    ci.at("lower").get_to(b.ci_lower);
    ci.at("upper").get_to(b.ci_upper);
    ci.at("clamped").get_to(b.ci_clamped);
    b.alpha = get_real(j, "alpha");
    b.c_alpha = get_real(j, "c_alpha");
    b.sw = get_optional<double>(j, "sw");
    j.at("coefficients").get_to(b.coefficients);
    const json& prof = j.at("ssr_profile");
    prof.at("dates").get_to(b.ssr_dates);
    b.ssr_profile.clear();
    for (const auto& v : prof.at("ssr")) {
        b.ssr_profile.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
}

void to_json(json& j, const SkippedSection& s) {
    j = json{{"segment", {s.first, s.last}}, {"reason", s.reason}};
}
void from_json(const json& j, SkippedSection& s) {
    s.first = j.at("segment").at(0).get<int>();
    s.last = j.at("segment").at(1).get<int>();
    j.at("reason").get_to(s.reason);
}

void to_json(json& j, const Warning& w) {
    j = json{{"code", w.code}, {"stage", w.stage}, {"detail", w.detail}, {"date", optional_json(w.date)}};
}
void from_json(const json& j, Warning& w) {
    j.at("code").get_to(w.code);
    j.at("stage").get_to(w.stage);
    j.at("detail").get_to(w.detail);
    w.date = get_optional<int>(j, "date");
}

void to_json(json& j, const DataSummary& d) {
    j = json{{"n_units", d.n_units},       {"n_periods", d.n_periods},       {"regressors", d.regressors},
             {"breaking", d.breaking},     {"common", d.common},             {"first_period", d.first_period},
             {"last_period", d.last_period}};
}
void from_json(const json& j, DataSummary& d) {
    j.at("n_units").get_to(d.n_units);
    j.at("n_periods").get_to(d.n_periods);
    j.at("regressors").get_to(d.regressors);
    j.at("breaking").get_to(d.breaking);
    j.at("common").get_to(d.common);
    j.at("first_period").get_to(d.first_period);
    j.at("last_period").get_to(d.last_period);
}

void to_json(json& j, const SimulationSummary& s) {
    j = json{{"seed", s.seed},
             {"n_paths", s.n_paths},
             {"argmax_step", real(s.argmax_step)},
             {"bessel_points", s.bessel_points}};
}
void from_json(const json& j, SimulationSummary& s) {
    j.at("seed").get_to(s.seed);
    j.at("n_paths").get_to(s.n_paths);
    s.argmax_step = get_real(j, "argmax_step");
    j.at("bessel_points").get_to(s.bessel_points);
}

void RunConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(Errc::invalid_argument, what); };
    static const std::vector<std::string> commands{"detect", "test", "estimate", "ci", "simulate", "tables"};
    if (std::find(commands.begin(), commands.end(), command) == commands.end()) bad("unknown command '" + command + "'");
    if (!(alpha > 0.0 && alpha < 1.0)) bad("alpha must lie in (0, 1)");
    if (!(trim > 0.0 && trim < 0.5)) bad("trim must lie in (0, 0.5)");
    if (kernel != "bartlett" && kernel != "uniform") bad("kernel must be bartlett or uniform");
    if (bandwidth && *bandwidth < 1) bad("bandwidth must be at least 1");
    if (max_breaks < 1) bad("max_breaks must be at least 1");
    if (time_order != "numeric" && time_order != "lexical") bad("time order must be numeric or lexical");
    if (format != "json" && format != "text") bad("format must be json or text");
    if (n_paths < 1000) bad("n_paths must be at least 1000");
    if (command == "tables" && r_max < 1) bad("r must be at least 1");
    const bool needs_data = command == "detect" || command == "test" || command == "estimate" || command == "ci";
    if (needs_data && input.empty()) bad("--input is required");
    if (command == "simulate" && experiment_config.empty()) bad("--config is required");
    for (const auto& b : break_columns) {
        if (!x_columns.empty() && std::find(x_columns.begin(), x_columns.end(), b) == x_columns.end()) {
            bad("breaking regressor '" + b + "' is not among the regressors");
        }
    }
}

std::string run_config_to_json(const RunConfig& config) { return json(config).dump(2); }

std::string report_to_json(const Report& r) {
    json j{{"schema_version", r.schema_version},
           {"tool", {{"name", "ccebreak"}, {"version", r.tool_version}}},
           {"config", r.config},
           {"data", r.data},
           {"simulation", r.simulation},
           {"test", r.test ? json(*r.test) : json()},
           {"decision", r.decision},
           {"breaks", r.breaks},
           {"segment_tests", r.segment_tests},
           {"skipped", r.skipped},
           {"warnings", r.warnings}};
    return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        Report r;
        j.at("schema_version").get_to(r.schema_version);
        if (r.schema_version != kReportSchemaVersion) {
            throw Error(Errc::parse_error, "unsupported schema_version " + std::to_string(r.schema_version));
        }
        j.at("tool").at("version").get_to(r.tool_version);
        j.at("config").get_to(r.config);
        j.at("data").get_to(r.data);
        j.at("simulation").get_to(r.simulation);
        r.test = get_optional<TestSection>(j, "test");
        j.at("decision").get_to(r.decision);
        j.at("breaks").get_to(r.breaks);
        j.at("segment_tests").get_to(r.segment_tests);
        j.at("skipped").get_to(r.skipped);
        j.at("warnings").get_to(r.warnings);
        return r;
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("malformed report: ") + e.what());
    }
}

namespace {

std::string date_text(const DateRef& d) { return std::to_string(d.index) + " (" + d.label + ")"; }

void append(std::string& out, const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
}

void test_text(std::string& out, const TestSection& t) {
    append(out, "  periods %d..%d\n", t.segment_first, t.segment_last);
    append(out, "  %-26s %14.6f\n", "SW", t.sw);
    append(out, "  %-26s %14.6f\n", "critical value", t.sw_critical);
    append(out, "  %-26s %14.6f\n", "chi2 critical (pointwise)", t.chi2_critical);
    append(out, "  %-26s %14s\n", "argmax date", date_text(t.argmax_date).c_str());
    append(out, "  %-26s %14s\n", "reject", t.reject ? "yes" : "no");
    append(out, "  %-26s %14d\n", "candidates", static_cast<int>(t.candidates.size()));
    if (!t.excluded.empty()) append(out, "  %-26s %14d\n", "excluded candidates", static_cast<int>(t.excluded.size()));
}

}  // namespace

std::string report_to_text(const Report& r) {
    std::string out;
    append(out, "ccebreak %s  command: %s  schema %d\n", r.tool_version.c_str(), r.config.command.c_str(),
           r.schema_version);
    append(out, "panel: N = %zu, T = %zu (%s .. %s)\n", r.data.n_units, r.data.n_periods, r.data.first_period.c_str(),
           r.data.last_period.c_str());
    if (r.test) {
        out += "\nsup-Wald test\n";
        test_text(out, *r.test);
    }
    if (!r.decision.empty()) append(out, "\n%s\n", r.decision.c_str());
    for (const auto& b : r.breaks) {
        append(out, "\nbreak in periods %d..%d\n", b.segment_first, b.segment_last);
        append(out, "  %-26s %14s\n", "b_hat", date_text(b.b_hat).c_str());
        append(out, "  %-26s %s .. %s%s\n", "confidence interval", date_text(b.ci_lower).c_str(),
               date_text(b.ci_upper).c_str(), b.ci_clamped ? " (clamped)" : "");
        if (b.sw) append(out, "  %-26s %14.6f\n", "SW", *b.sw);
        append(out, "  %-20s %-6s %14s %14s\n", "coefficient", "kind", "estimate", "std.error");
        for (const auto& c : b.coefficients) {
            append(out, "  %-20s %-6s %14.6f %14.6f\n", c.name.c_str(), c.kind.c_str(), c.estimate, c.std_error);
        }
    }
    if (!r.warnings.empty()) {
        out += "\nwarnings\n";
        for (const auto& w : r.warnings) {
            append(out, "  [%s] %s: %s\n", w.stage.c_str(), w.code.c_str(), w.detail.c_str());
        }
    }
    return out;
}

}  // namespace ccebreak
