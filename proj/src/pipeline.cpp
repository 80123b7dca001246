#include "ccebreak/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "ccebreak/csv.hpp"
#include "ccebreak/error.hpp"
#include "ccebreak/estimator.hpp"
#include "ccebreak/experiment.hpp"
#include "ccebreak/wald.hpp"

#ifndef CCEBREAK_VERSION
#define CCEBREAK_VERSION "0.0.0"
#endif

namespace ccebreak {

namespace {

DateRef date_ref(const PanelData& panel, int b) {
    DateRef d;
    d.index = b;
    if (b >= 1 && b <= static_cast<int>(panel.n_periods())) d.label = panel.time_labels()[static_cast<std::size_t>(b - 1)];
    return d;
}

HacConfig hac_for(const RunConfig& c) {
    HacConfig h;
    h.kernel = c.kernel == "uniform" ? Kernel::truncated_uniform : Kernel::bartlett;
    h.bandwidth = c.bandwidth;
    h.homoskedastic = c.homoskedastic;
    return h;
}

// Re-raise a library error with the pipeline stage prefixed, keeping its code.
template <class Fn>
auto in_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(stage) + ": " + e.what());
    }
}

Report skeleton(const RunConfig& config, const PanelData& panel, const BreakSpec& spec, const CriticalValues& cv) {
    Report r;
    r.schema_version = kReportSchemaVersion;
    r.tool_version = version();
    r.config = config;
    r.data.n_units = panel.n_units();
    r.data.n_periods = panel.n_periods();
    r.data.regressors = panel.x_names();
    for (auto c : spec.breaking) r.data.breaking.push_back(panel.x_names()[c]);
    r.data.common = panel.d_names();
    r.data.first_period = panel.time_labels().front();
    r.data.last_period = panel.time_labels().back();
    r.simulation.seed = cv.config().seed;
    r.simulation.n_paths = cv.config().n_paths;
    r.simulation.argmax_step = cv.config().argmax_step;
    r.simulation.bessel_points = cv.config().bessel_points;
    return r;
}

TestSection test_section(const PanelData& panel, const WaldResult& w, const HacConfig& hac, int first, int last) {
    TestSection t;
    t.segment_first = first;
    t.segment_last = last;
    t.sw = w.sw;
    t.sw_critical = w.sw_critical;
    t.chi2_critical = w.chi2_critical;
    t.reject = w.reject_sw;
    t.argmax_date = date_ref(panel, w.argmax_date);
    t.trim = w.trim_fraction;
    t.alpha = w.alpha;
    t.r = w.r;
    t.kernel = hac.kernel == Kernel::bartlett ? "bartlett" : "uniform";
    t.bandwidth = w.bandwidth;
    t.homoskedastic = hac.homoskedastic;
    for (std::size_t c = 0; c < w.candidate_dates.size(); ++c) {
        t.candidates.push_back({date_ref(panel, w.candidate_dates[c]), w.wald_values[c]});
    }
    for (const auto& e : w.excluded) t.excluded.push_back(date_ref(panel, e.break_date));
    return t;
}

void test_warnings(Report& r, const WaldResult& w) {
    for (const auto& e : w.excluded) {
        r.warnings.push_back({"candidate_excluded", "test", std::string(to_string(e.reason)) + ": " + e.detail,
                              e.break_date});
    }
}

BreakSection break_section(const PanelData& panel, const BreakSpec& spec, const BreakFit& fit, int first, int last,
                           bool with_coefficients) {
    BreakSection b;
    b.segment_first = first;
    b.segment_last = last;
    b.b_hat = date_ref(panel, fit.b_hat);
    b.ci_lower = date_ref(panel, fit.ci_lower);
    b.ci_upper = date_ref(panel, fit.ci_upper);
    b.ci_clamped = fit.ci_clamped;
    b.alpha = fit.alpha;
    b.c_alpha = fit.critical_value;
    if (with_coefficients && fit.theta_unidentified.empty()) {
        const Eigen::VectorXd se = fit.theta_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        const std::size_t k = panel.n_regressors();
        for (std::size_t j = 0; j < k + spec.r(); ++j) {
            const bool is_delta = j >= k;
            const std::string name = panel.x_names()[is_delta ? spec.breaking[j - k] : j];
            const auto jj = static_cast<Eigen::Index>(j);
            b.coefficients.push_back({name, is_delta ? "delta" : "beta", fit.theta_hat(jj), se(jj)});
        }
    }
    if (with_coefficients) {
        b.ssr_profile = fit.profile.ssr_values;
        b.ssr_dates = fit.profile.candidate_dates;
    }
    return b;
}

void fit_warnings(Report& r, const BreakFit& fit, bool with_coefficients) {
    if (fit.ci_clamped) {
        r.warnings.push_back({"ci_clamped", "estimate", "interval endpoints were moved into [1, T-1]", fit.b_hat});
    }
    if (with_coefficients && !fit.theta_unidentified.empty()) {
        r.warnings.push_back({"theta_unidentified", "estimate", fit.theta_unidentified, fit.b_hat});
    }
}

std::string format_report(const RunConfig& config, const Report& report) {
    return config.format == "text" ? report_to_text(report) : report_to_json(report);
}

}  // namespace

const char* version() noexcept { return CCEBREAK_VERSION; }

SimulationConfig simulation_config(const RunConfig& config) {
    SimulationConfig s;
    s.seed = config.seed;
    s.n_paths = config.n_paths;
    s.threads = std::max<std::size_t>(1, config.threads);
    return s;
}

PanelData load_panel(const RunConfig& config) {
    ColumnRoles roles;
    roles.unit = config.unit_column;
    roles.time = config.time_column;
    roles.y = config.y_column;
    roles.x_columns = config.x_columns;
    return in_stage("ingest", [&] {
        return read_panel(config.input, config.common_input, roles, config.intercept,
                          config.time_order == "lexical" ? TimeOrder::lexical : TimeOrder::numeric);
    });
}

BreakSpec break_spec_for(const PanelData& panel, const RunConfig& config) {
    BreakSpec spec;
    spec.trim_fraction = config.trim;
    const auto& names = panel.x_names();
    if (config.break_columns.empty()) {
        for (std::size_t j = 0; j < names.size(); ++j) spec.breaking.push_back(j);
    } else {
        for (const auto& b : config.break_columns) {
            auto it = std::find(names.begin(), names.end(), b);
            if (it == names.end()) {
                throw Error(Errc::invalid_argument, "breaking regressor '" + b + "' is not among the regressors");
            }
            spec.breaking.push_back(static_cast<std::size_t>(it - names.begin()));
        }
    }
    spec.validate(panel.n_regressors());
    return spec;
}

Report run_detect(const RunConfig& config, const PanelData& panel, CriticalValues& cv) {
    const BreakSpec spec = break_spec_for(panel, config);
    const HacConfig hac = hac_for(config);
    Report r = skeleton(config, panel, spec, cv);
    const SequentialResult seq = in_stage("detect", [&] {
        return sequential_breaks(panel, spec, hac, config.alpha, config.max_breaks, cv);
    });
    for (std::size_t s = 0; s < seq.segment_tests.size(); ++s) {
        const auto [first, last] = seq.tested_segments[s];
        TestSection t = test_section(panel, seq.segment_tests[s], hac, first, last);
        if (s == 0) r.test = t;
        r.segment_tests.push_back(std::move(t));
        test_warnings(r, seq.segment_tests[s]);
    }
    for (const auto& b : seq.breaks) {
        BreakSection sec = break_section(panel, spec, b.fit, b.segment_first, b.segment_last, true);
        sec.sw = b.test.sw;
        r.breaks.push_back(std::move(sec));
        fit_warnings(r, b.fit, true);
    }
    for (const auto& s : seq.skipped) {
        r.skipped.push_back({s.first, s.last, s.reason});
        r.warnings.push_back({"segment_skipped", "sequential",
                              "periods " + std::to_string(s.first) + ".." + std::to_string(s.last) + ": " + s.reason,
                              std::nullopt});
    }
    r.decision = r.breaks.empty() ? "no break detected" : "break detected";
    return r;
}

Report run_test(const RunConfig& config, const PanelData& panel, CriticalValues& cv) {
    const BreakSpec spec = break_spec_for(panel, config);
    const HacConfig hac = hac_for(config);
    Report r = skeleton(config, panel, spec, cv);
    const WaldResult w = in_stage("test", [&] { return sup_wald(panel, spec, hac, config.alpha, cv); });
    r.test = test_section(panel, w, hac, 1, static_cast<int>(panel.n_periods()));
    test_warnings(r, w);
    r.decision = w.reject_sw ? "break detected" : "no break detected";
    return r;
}

Report run_estimate(const RunConfig& config, const PanelData& panel, CriticalValues& cv) {
    const BreakSpec spec = break_spec_for(panel, config);
    Report r = skeleton(config, panel, spec, cv);
    const BreakFit fit = in_stage("estimate", [&] { return fit_break(panel, spec, config.alpha, cv); });
    r.breaks.push_back(break_section(panel, spec, fit, 1, static_cast<int>(panel.n_periods()), true));
    fit_warnings(r, fit, true);
    return r;
}

Report run_ci(const RunConfig& config, const PanelData& panel, CriticalValues& cv) {
    const BreakSpec spec = break_spec_for(panel, config);
    Report r = skeleton(config, panel, spec, cv);
    const BreakFit fit = in_stage("ci", [&] { return fit_break(panel, spec, config.alpha, cv); });
    r.breaks.push_back(break_section(panel, spec, fit, 1, static_cast<int>(panel.n_periods()), false));
    fit_warnings(r, fit, false);
    return r;
}

std::string run_tables(const RunConfig& config) {
    if (config.r_max < 1) throw Error(Errc::invalid_argument, "r must be at least 1");
    const SimulationConfig sim = simulation_config(config);
    const std::vector<double> eps{0.05, 0.10, 0.15, 0.20};
    const std::vector<double> alphas{0.01, 0.05, 0.10};
    const auto tables = build_quantile_tables(config.r_max, eps, alphas, sim);
    const std::filesystem::path path = config.cache.empty() ? CriticalValues::default_cache_path()
                                                             : std::filesystem::path(config.cache);
    write_quantile_cache(path, tables);

    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "wrote %s (seed %llu, %zu paths)\n\n", path.string().c_str(),
                  static_cast<unsigned long long>(sim.seed), sim.n_paths);
    out += buf;
    for (const auto& t : tables) {
        if (t.law != LimitLaw::argmax_two_sided_bm) continue;
        out += "argmax law, c_alpha (horizon " + std::to_string(static_cast<long long>(t.horizon)) + ")\n";
        for (double a : alphas) {
            std::snprintf(buf, sizeof buf, "  alpha = %.2f  %10.4f\n", a, t.quantiles.at(1.0 - a / 2.0));
            out += buf;
        }
    }
    out += "\nsup-Wald critical values\n";
    std::snprintf(buf, sizeof buf, "  %3s %6s %10s %10s %10s\n", "r", "eps", "10%", "5%", "1%");
    out += buf;
    for (const auto& t : tables) {
        if (t.law != LimitLaw::sup_bessel) continue;
        std::snprintf(buf, sizeof buf, "  %3d %6.2f %10.4f %10.4f %10.4f\n", t.r, t.eps, t.quantiles.at(0.90),
                      t.quantiles.at(0.95), t.quantiles.at(0.99));
        out += buf;
    }
    return out;
}

std::string run_simulate(const RunConfig& config) {
    ExperimentSpec spec = read_experiment_config(config.experiment_config);
    if (!config.write_panel.empty()) {
        const SimulatedPanel sim = generate(spec.dgp);
        std::filesystem::path common;
        if (sim.panel.n_common() > (spec.dgp.n_known > 0 ? 1u : 0u)) {
            common = config.write_panel;
            common.replace_extension();
            common += "_common.csv";
        }
        write_panel(sim.panel, config.write_panel, common);
        return "wrote " + config.write_panel + (common.empty() ? "" : " and " + common.string()) + "\n";
    }
    if (spec.options.threads < config.threads) spec.options.threads = config.threads;
    CriticalValues cv(simulation_config(config));
    cv.load(config.cache.empty() ? CriticalValues::default_cache_path() : std::filesystem::path(config.cache));
    const ExperimentReport report = in_stage("simulate", [&] {
        return run_experiment(spec.dgp, spec.pipeline, spec.reps, spec.alpha, cv, spec.options);
    });
    return config.format == "text" ? experiment_table(report) : experiment_json(spec, report);
}

std::string run_command(const RunConfig& config) {
    config.validate();
    if (config.command == "tables") return run_tables(config);
    if (config.command == "simulate") return run_simulate(config);
    const PanelData panel = load_panel(config);
    CriticalValues cv(simulation_config(config));
    cv.load(config.cache.empty() ? CriticalValues::default_cache_path() : std::filesystem::path(config.cache));
    Report report;
    if (config.command == "detect") report = run_detect(config, panel, cv);
    else if (config.command == "test") report = run_test(config, panel, cv);
    else if (config.command == "estimate") report = run_estimate(config, panel, cv);
    else report = run_ci(config, panel, cv);
    return format_report(config, report);
}

}  // namespace ccebreak
