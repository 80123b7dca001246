#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccebreak/dgp.hpp"
#include "ccebreak/estimator.hpp"
#include "ccebreak/limit_dist.hpp"
#include "ccebreak/wald.hpp"

namespace ccebreak {

enum class Pipeline {
    estimate,  ///< date the break and build its interval
    test,      ///< sup-Wald test
    full,      ///< both
};

struct ExperimentOptions {
    double trim_fraction = 0.15;
    HacConfig hac;
    FactorProxies proxies = FactorProxies::cce;
    std::optional<int> pointwise_date;  ///< also record W(b) at this date
    std::size_t threads = 1;
    double max_error_share = 0.01;
};

struct Metric {
    double value = 0.0;
    double standard_error = 0.0;
};

/**
 * @brief Aggregated Monte Carlo results.
 *
 * Metric keys: rejection_rate (test), exact_hit_rate, mean_abs_date_error, ci_coverage,
 * ci_mean_width (estimate, only when the config has a break). Per-replication draws are kept
 * for quantile checks; failed replications hold NaN.
 */
struct ExperimentReport {
    std::size_t replications = 0;
    std::size_t failed = 0;
    std::map<std::string, std::size_t> failures_by_reason;
    std::map<std::string, Metric> metrics;
    std::vector<double> sw;
    std::vector<double> pointwise_wald;
    std::vector<int> b_hat;
    std::uint64_t seed = 0;
};

/// Seed of replication `rep` in an experiment seeded with `seed`.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep) noexcept;

/**
 * @brief Generate `reps` panels from config (seeds derived from config.seed), run the
 * pipeline on each and score against the truth.
 *
 * Results depend only on the config, never on the thread count. A replication that raises a
 * library error is counted; more than max_error_share * reps failures abort with
 * TooManyFailedReplications.
 */
ExperimentReport run_experiment(const DgpConfig& config, Pipeline pipeline, std::size_t reps, double alpha,
                                CriticalValues& critical_values, const ExperimentOptions& options = {});

/// Configuration read from a key = value file: the DGP plus pipeline settings.
struct ExperimentSpec {
    DgpConfig dgp;
    Pipeline pipeline = Pipeline::full;
    std::size_t reps = 100;
    double alpha = 0.05;
    ExperimentOptions options;
};

/// Lines are `key = value`; '#' starts a comment. Vectors are comma separated. Unknown keys
/// are a ParseError.
ExperimentSpec parse_experiment_config(const std::string& text);
ExperimentSpec read_experiment_config(const std::filesystem::path& path);

std::string experiment_json(const ExperimentSpec& spec, const ExperimentReport& report);
std::string experiment_table(const ExperimentReport& report);

}  // namespace ccebreak
