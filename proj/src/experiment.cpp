#include "ccebreak/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ccebreak/error.hpp"

namespace ccebreak {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Replication {
    bool ok = false;
    std::string failure;
    double sw = kNaN;
    bool reject = false;
    double pointwise = kNaN;
    int b_hat = -1;
    bool have_ci = false;
    int ci_lower = 0;
    int ci_upper = 0;
};

Replication run_one(const DgpConfig& base, std::size_t rep, Pipeline pipeline, double alpha,
                    CriticalValues& cv, const ExperimentOptions& opt) {
    DgpConfig config = base;
    config.seed = replication_seed(base.seed, rep);
    Replication out;
    try {
        const SimulatedPanel sim = generate(config);
        const BreakSpec spec = config.break_spec(opt.trim_fraction);
        if (pipeline != Pipeline::estimate) {
            const WaldResult test = sup_wald(sim.panel, spec, opt.hac, alpha, cv);
            out.sw = test.sw;
            out.reject = test.reject_sw;
        }
        if (opt.pointwise_date) out.pointwise = wald_at(sim.panel, spec, *opt.pointwise_date, opt.hac);
        if (pipeline != Pipeline::test) {
            const SsrProfile profile = estimate_breakpoint(sim.panel, spec, opt.proxies);
            out.b_hat = profile.b_hat();
            if (opt.proxies == FactorProxies::cce && config.b0) {
                const auto fit =
                    fit_partialled(project_regression(sim.panel, spec, out.b_hat, ProjectionMode::estimation));
                const ConfidenceInterval ci =
                    confidence_interval(sim.panel, spec, out.b_hat, fit.delta, alpha, cv);
                out.have_ci = true;
                out.ci_lower = ci.lower;
                out.ci_upper = ci.upper;
            }
        }
        out.ok = true;
    } catch (const Error& e) {
        if (e.code() == Errc::internal || e.code() == Errc::config_invariant_violation) throw;
        out.failure = to_string(e.code());
    }
    return out;
}

Metric rate(std::size_t hits, std::size_t n) {
    const double p = n ? static_cast<double>(hits) / static_cast<double>(n) : kNaN;
    return {p, n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : kNaN};
}

Metric mean_of(const std::vector<double>& v) {
    if (v.empty()) return {kNaN, kNaN};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::size_t line) {
    throw Error(Errc::parse_error,
                "invalid value '" + value + "' for '" + key + "' (line " + std::to_string(line) + ")");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v, std::size_t line) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, line);
    return out;
}

long long to_int(const std::string& key, const std::string& v, std::size_t line) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, line);
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v, std::size_t line) {
    const long long n = to_int(key, v, line);
    if (n < 0) bad_value(key, v, line);
    return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v, std::size_t line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, line);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

Eigen::VectorXd to_vector(const std::string& key, const std::string& v, std::size_t line) {
    const auto items = split_list(v);
    Eigen::VectorXd out(static_cast<Eigen::Index>(items.size()));
    for (std::size_t j = 0; j < items.size(); ++j) out(static_cast<Eigen::Index>(j)) = to_double(key, items[j], line);
    return out;
}

const char* pipeline_name(Pipeline p) {
    switch (p) {
        case Pipeline::estimate: return "estimate";
        case Pipeline::test: return "test";
        case Pipeline::full: return "full";
    }
    return "full";
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(0x5EEDull + rep));
}

ExperimentReport run_experiment(const DgpConfig& config, Pipeline pipeline, std::size_t reps, double alpha,
                                CriticalValues& critical_values, const ExperimentOptions& options) {
    if (reps < 1) throw Error(Errc::invalid_argument, "reps must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1)");
    config.validate();
    if (pipeline != Pipeline::estimate) {
        critical_values.sup_bessel(static_cast<int>(config.breaking.size()), options.trim_fraction, alpha);
    }
    if (pipeline != Pipeline::test && config.b0) critical_values.argmax_c(alpha);

    std::vector<Replication> results(reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t rep = next++; rep < reps; rep = next++) {
            results[rep] = run_one(config, rep, pipeline, alpha, critical_values, options);
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, reps));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ExperimentReport report;
    report.replications = reps;
    report.seed = config.seed;
    std::size_t n_test = 0, rejections = 0, n_date = 0, hits = 0, n_ci = 0, covered = 0;
    std::vector<double> abs_errors, widths;
    for (const auto& r : results) {
        report.sw.push_back(r.sw);
        report.pointwise_wald.push_back(r.pointwise);
        report.b_hat.push_back(r.b_hat);
        if (!r.ok) {
            ++report.failed;
            ++report.failures_by_reason[r.failure];
            continue;
        }
        if (pipeline != Pipeline::estimate) {
            ++n_test;
            rejections += r.reject ? 1 : 0;
        }
        if (pipeline != Pipeline::test && config.b0) {
            ++n_date;
            hits += r.b_hat == *config.b0 ? 1 : 0;
            abs_errors.push_back(std::abs(r.b_hat - *config.b0));
            if (r.have_ci) {
                ++n_ci;
                covered += (r.ci_lower <= *config.b0 && *config.b0 <= r.ci_upper) ? 1 : 0;
                widths.push_back(static_cast<double>(r.ci_upper - r.ci_lower));
            }
        }
    }
    if (static_cast<double>(report.failed) > options.max_error_share * static_cast<double>(reps)) {
        std::string reasons;
        for (const auto& [why, count] : report.failures_by_reason) {
            reasons += (reasons.empty() ? "" : ", ") + why + " x" + std::to_string(count);
        }
        throw Error(Errc::too_many_failed_replications,
                    std::to_string(report.failed) + " of " + std::to_string(reps) + " replications failed (" +
                        reasons + ")");
    }
    if (pipeline != Pipeline::estimate) report.metrics["rejection_rate"] = rate(rejections, n_test);
    if (pipeline != Pipeline::test && config.b0) {
        report.metrics["exact_hit_rate"] = rate(hits, n_date);
        report.metrics["mean_abs_date_error"] = mean_of(abs_errors);
        if (options.proxies == FactorProxies::cce) {
            report.metrics["ci_coverage"] = rate(covered, n_ci);
            report.metrics["ci_mean_width"] = mean_of(widths);
        }
    }
    return report;
}

ExperimentSpec parse_experiment_config(const std::string& text) {
    ExperimentSpec spec;
    auto& d = spec.dgp;
    bool beta_set = false, delta_set = false;
    std::stringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::parse_error, "expected 'key = value' (line " + std::to_string(line) + ")");
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string v = trim(body.substr(eq + 1));
        if (key == "n_units") d.n_units = to_size(key, v, line);
        else if (key == "n_periods") d.n_periods = to_size(key, v, line);
        else if (key == "k") d.k = to_size(key, v, line);
        else if (key == "m") d.m = to_size(key, v, line);
        else if (key == "n_known") d.n_known = to_size(key, v, line);
        else if (key == "breaking") {
            d.breaking.clear();
            for (const auto& item : split_list(v)) {
                const std::size_t c = to_size(key, item, line);
                if (c < 1) bad_value(key, v, line);
                d.breaking.push_back(c - 1);
            }
        } else if (key == "beta") {
            d.beta = to_vector(key, v, line);
            beta_set = true;
        } else if (key == "delta") {
            d.delta = to_vector(key, v, line);
            delta_set = true;
        } else if (key == "b0") {
            if (v == "none") d.b0.reset();
            else d.b0 = static_cast<int>(to_int(key, v, line));
        } else if (key == "factor_process") {
            if (v == "iid") d.factor_process = FactorProcess::iid_normal;
            else if (v == "ar1") d.factor_process = FactorProcess::ar1;
            else bad_value(key, v, line);
        } else if (key == "factor_rho") d.factor_rho = to_double(key, v, line);
        else if (key == "loading_mean") d.loading_mean = to_double(key, v, line);
        else if (key == "gamma_mean") d.gamma_mean = to_double(key, v, line);
        else if (key == "loading_dispersion") d.loading_dispersion = to_double(key, v, line);
        else if (key == "heteroskedastic") d.heteroskedastic = to_bool(key, v, line);
        else if (key == "sigma2_low") d.sigma2_low = to_double(key, v, line);
        else if (key == "sigma2_high") d.sigma2_high = to_double(key, v, line);
        else if (key == "eps_rho") d.eps_rho = to_double(key, v, line);
        else if (key == "v_scale") d.v_scale = to_double(key, v, line);
        else if (key == "seed") d.seed = static_cast<std::uint64_t>(to_size(key, v, line));
        else if (key == "require_testing_rank") d.require_testing_rank = to_bool(key, v, line);
        else if (key == "pipeline") {
            if (v == "estimate") spec.pipeline = Pipeline::estimate;
            else if (v == "test") spec.pipeline = Pipeline::test;
            else if (v == "full") spec.pipeline = Pipeline::full;
            else bad_value(key, v, line);
        } else if (key == "reps") spec.reps = to_size(key, v, line);
        else if (key == "alpha") spec.alpha = to_double(key, v, line);
        else if (key == "trim") spec.options.trim_fraction = to_double(key, v, line);
        else if (key == "kernel") {
            if (v == "bartlett") spec.options.hac.kernel = Kernel::bartlett;
            else if (v == "uniform") spec.options.hac.kernel = Kernel::truncated_uniform;
            else bad_value(key, v, line);
        } else if (key == "bandwidth") {
            if (v == "auto") spec.options.hac.bandwidth.reset();
            else spec.options.hac.bandwidth = static_cast<int>(to_int(key, v, line));
        } else if (key == "homoskedastic") spec.options.hac.homoskedastic = to_bool(key, v, line);
        else if (key == "proxies") {
            if (v == "cce") spec.options.proxies = FactorProxies::cce;
            else if (v == "known_only") spec.options.proxies = FactorProxies::known_only;
            else bad_value(key, v, line);
        } else if (key == "pointwise_date") spec.options.pointwise_date = static_cast<int>(to_int(key, v, line));
        else if (key == "threads") spec.options.threads = to_size(key, v, line);
        else throw Error(Errc::parse_error, "unknown key '" + key + "' (line " + std::to_string(line) + ")");
    }
    if (!beta_set) d.beta = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.k));
    if (!delta_set) d.delta = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.breaking.size()));
    return spec;
}

ExperimentSpec read_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::string experiment_json(const ExperimentSpec& spec, const ExperimentReport& report) {
    using nlohmann::json;
    const auto& d = spec.dgp;
    std::vector<std::size_t> breaking;
    for (auto c : d.breaking) breaking.push_back(c + 1);
    json config = {
        {"n_units", d.n_units},
        {"n_periods", d.n_periods},
        {"k", d.k},
        {"m", d.m},
        {"n_known", d.n_known},
        {"breaking", breaking},
        {"beta", std::vector<double>(d.beta.data(), d.beta.data() + d.beta.size())},
        {"delta", std::vector<double>(d.delta.data(), d.delta.data() + d.delta.size())},
        {"b0", d.b0 ? json(*d.b0) : json()},
        {"factor_process", d.factor_process == FactorProcess::ar1 ? "ar1" : "iid"},
        {"factor_rho", d.factor_rho},
        {"loading_mean", d.loading_mean},
        {"gamma_mean", d.gamma_mean},
        {"loading_dispersion", d.loading_dispersion},
        {"heteroskedastic", d.heteroskedastic},
        {"sigma2_low", d.sigma2_low},
        {"sigma2_high", d.sigma2_high},
        {"eps_rho", d.eps_rho},
        {"v_scale", d.v_scale},
        {"seed", d.seed},
        {"pipeline", pipeline_name(spec.pipeline)},
        {"reps", spec.reps},
        {"alpha", spec.alpha},
        {"trim", spec.options.trim_fraction},
        {"kernel", spec.options.hac.kernel == Kernel::bartlett ? "bartlett" : "uniform"},
        {"bandwidth", spec.options.hac.bandwidth ? json(*spec.options.hac.bandwidth) : json("auto")},
        {"homoskedastic", spec.options.hac.homoskedastic},
        {"proxies", spec.options.proxies == FactorProxies::cce ? "cce" : "known_only"},
    };
    json metrics = json::object();
    for (const auto& [name, m] : report.metrics) {
        metrics[name] = {{"value", number_or_null(m.value)}, {"standard_error", number_or_null(m.standard_error)}};
    }
    json out = {
        {"schema_version", 1},
        {"config", config},
        {"replications", report.replications},
        {"failed", report.failed},
        {"failures_by_reason", report.failures_by_reason},
        {"metrics", metrics},
    };
    return out.dump(2) + "\n";
}

std::string experiment_table(const ExperimentReport& report) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %12s %12s\n", "metric", "value", "std.err");
    out += buf;
    for (const auto& [name, m] : report.metrics) {
        std::snprintf(buf, sizeof buf, "%-22s %12.6f %12.6f\n", name.c_str(), m.value, m.standard_error);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-22s %12zu\n%-22s %12zu\n", "replications", report.replications, "failed",
                  report.failed);
    out += buf;
    return out;
}

}  // namespace ccebreak
