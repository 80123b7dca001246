#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace ccebreak {

/// The two limiting laws used for inference.
enum class LimitLaw {
    argmax_two_sided_bm,  ///< argmax_v (-|v|/2 + B(v)), B two-sided Brownian motion
    sup_bessel,           ///< sup over [eps, 1-eps] of |J(t) - t J(1)|^2 / (t (1 - t))
};

/// Controls for the path simulations.
struct SimulationConfig {
    std::size_t n_paths = 200000;
    double argmax_step = 0.02;          ///< grid step of the two-sided random walk
    std::size_t bessel_points = 1000;   ///< grid points on (0, 1] for the Bessel sup
    double initial_horizon = 16.0;      ///< first V for the argmax walk, doubled as needed
    double horizon_cap = 65536.0;
    std::uint64_t seed = 20210601;
    std::size_t threads = 1;            ///< worker threads; results do not depend on it
};

/**
 * @brief Quantiles of one limiting law, as stored in the cache file.
 *
 * For the argmax law the key is the probability 1 - alpha/2 and the value c_alpha, read as
 * the (1 - alpha) quantile of |argmax| (the law is symmetric about zero). For the sup law
 * the key is 1 - alpha.
 */
struct QuantileTable {
    LimitLaw law = LimitLaw::sup_bessel;
    int r = 0;           ///< dimension of J; 0 for the argmax law
    double eps = 0.0;    ///< trimming; 0 for the argmax law
    double grid_step = 0.0;
    double horizon = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::map<double, double> quantiles;

    bool operator==(const QuantileTable&) const = default;
};

/// Empirical quantile (linear interpolation between order statistics) of a sorted sample.
double empirical_quantile(std::span<const double> sorted, double prob);

struct ArgmaxSample {
    std::vector<double> argmax;  ///< one signed argmax per path
    double horizon = 0.0;        ///< V actually used
};

/// Simulate argmax_v(-|v|/2 + B(v)) on [-V, V], doubling V until >= 99.9% of argmaxes fall in
/// [-V/2, V/2]. Throws HorizonNotConverged when V would exceed the cap.
ArgmaxSample simulate_argmax(const SimulationConfig& config);

struct BesselSample {
    std::vector<std::vector<double>> sup;    ///< one sample per requested eps
    std::vector<std::vector<double>> probe;  ///< one sample per probe tau (pointwise values)
};

/// Simulate the squared standardized tied-down Bessel process of order r.
BesselSample simulate_bessel(int r, std::span<const double> eps, std::span<const double> probe_taus,
                             const SimulationConfig& config);

/// prob-quantile of the signed argmax law.
double argmax_quantile(double prob, const SimulationConfig& config = {});

/// c_alpha for a 100(1-alpha)% break-date interval.
double argmax_critical_value(double alpha, const SimulationConfig& config = {});

/// (1-alpha)-quantile of the sup-Wald null law for r breaking coefficients and trimming eps.
double sup_bessel_critical(int r, double eps, double alpha, const SimulationConfig& config = {});

std::vector<QuantileTable> read_quantile_cache(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`.
void write_quantile_cache(const std::filesystem::path& path, std::span<const QuantileTable> tables);

/// Simulate the default grid: argmax c_alpha for each alpha, and sup-Bessel critical values
/// for r = 1..r_max and each eps/alpha.
std::vector<QuantileTable> build_quantile_tables(int r_max, std::span<const double> eps,
                                                 std::span<const double> alphas,
                                                 const SimulationConfig& config);

/**
 * @brief Critical-value provider used by the estimators and tests.
 *
 * Answers from loaded tables when a table with the same simulation settings exists, and
 * otherwise simulates and memoizes. Safe for concurrent use.
 */
class CriticalValues {
public:
    explicit CriticalValues(SimulationConfig config = {});
    ~CriticalValues();
    CriticalValues(const CriticalValues&) = delete;
    CriticalValues& operator=(const CriticalValues&) = delete;

    /// Adds the tables in a cache file; a missing file is ignored and returns false.
    bool load(const std::filesystem::path& path);
    void add(const QuantileTable& table);

    double argmax_c(double alpha);
    double sup_bessel(int r, double eps, double alpha);

    const SimulationConfig& config() const noexcept { return config_; }

    /// The cache file shipped with the library, if it was found at build time.
    static std::filesystem::path default_cache_path();

private:
    struct State;
    SimulationConfig config_;
    std::unique_ptr<State> state_;
};

}  // namespace ccebreak
