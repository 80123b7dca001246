#include "ccebreak/limit_dist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/seed_seq.hpp>

#include "ccebreak/error.hpp"

#ifndef CCEBREAK_DEFAULT_CACHE
#define CCEBREAK_DEFAULT_CACHE ""
#endif

namespace ccebreak {

namespace {

constexpr std::size_t kBlockPaths = 1024;
constexpr double kInnerShare = 0.999;
constexpr std::uint32_t kArgmaxTag = 0xA5A5u;
constexpr std::uint32_t kBesselTag = 0xB3B3u;

using Engine = boost::random::mt19937_64;

Engine block_engine(std::uint64_t seed, std::uint32_t tag, std::size_t block, std::size_t level) {
    boost::random::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                                static_cast<std::uint32_t>(seed >> 32), tag,
                                static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(level)};
    return Engine(seq);
}

// Runs fn(block) for every block; blocks are independent so the split over threads does not
// change results.
template <class Fn>
void for_each_block(std::size_t n_blocks, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n_blocks));
    if (threads == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t b = w; b < n_blocks; b += threads) fn(b);
        });
    }
    for (auto& th : pool) th.join();
}

void check_config(const SimulationConfig& c) {
    if (c.n_paths < 1) throw Error(Errc::invalid_argument, "n_paths must be positive");
    if (!(c.argmax_step > 0.0)) throw Error(Errc::invalid_argument, "argmax step must be positive");
    if (c.bessel_points < 2) throw Error(Errc::invalid_argument, "need at least 2 Bessel grid points");
    if (!(c.initial_horizon > 0.0) || c.horizon_cap < c.initial_horizon) {
        throw Error(Errc::invalid_argument, "invalid argmax horizon settings");
    }
}

void check_prob(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::invalid_argument, "probability must lie in (0, 1)");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1]");
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// Process-wide memo of sorted samples, keyed by everything that determines them.
using SampleKey = std::tuple<int, int, double, double, std::size_t, std::uint64_t, double, double>;

struct SampleMemo {
    std::shared_mutex mutex;
    std::map<SampleKey, std::shared_ptr<const std::vector<double>>> samples;
};

SampleMemo& memo() {
    static SampleMemo m;
    return m;
}

template <class Make>
std::shared_ptr<const std::vector<double>> memoized(const SampleKey& key, Make&& make) {
    auto& m = memo();
    {
        std::shared_lock lock(m.mutex);
        auto it = m.samples.find(key);
        if (it != m.samples.end()) return it->second;
    }
    auto sample = std::make_shared<const std::vector<double>>(make());
    std::unique_lock lock(m.mutex);
    return m.samples.emplace(key, std::move(sample)).first->second;
}

std::shared_ptr<const std::vector<double>> sorted_abs_argmax(const SimulationConfig& c) {
    const SampleKey key{0, 1, 0.0, c.argmax_step, c.n_paths, c.seed, c.initial_horizon, c.horizon_cap};
    return memoized(key, [&] {
        auto s = simulate_argmax(c).argmax;
        for (auto& v : s) v = std::abs(v);
        std::sort(s.begin(), s.end());
        return s;
    });
}

std::shared_ptr<const std::vector<double>> sorted_signed_argmax(const SimulationConfig& c) {
    const SampleKey key{0, 0, 0.0, c.argmax_step, c.n_paths, c.seed, c.initial_horizon, c.horizon_cap};
    return memoized(key, [&] {
        auto s = simulate_argmax(c).argmax;
        std::sort(s.begin(), s.end());
        return s;
    });
}

std::shared_ptr<const std::vector<double>> sorted_sup(int r, double eps, const SimulationConfig& c) {
    const SampleKey key{r, 2, eps, 1.0 / static_cast<double>(c.bessel_points), c.n_paths, c.seed, 0.0, 0.0};
    return memoized(key, [&] {
        const double e[] = {eps};
        auto s = std::move(simulate_bessel(r, e, {}, c).sup.front());
        std::sort(s.begin(), s.end());
        return s;
    });
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

double empirical_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) throw Error(Errc::invalid_argument, "empty sample");
    prob = std::clamp(prob, 0.0, 1.0);
    const double h = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ArgmaxSample simulate_argmax(const SimulationConfig& config) {
    check_config(config);
    const std::size_t n = config.n_paths;
    const double step = config.argmax_step;
    const double sd = std::sqrt(step);
    const double drift = 0.5 * step;
    // Per path and wing (0 right, 1 left): current walk value, running max and its location.
    std::vector<double> edge(2 * n, 0.0), best(2 * n, 0.0), where(2 * n, 0.0);
    std::vector<double> argmax(n, 0.0);
    const std::size_t n_blocks = (n + kBlockPaths - 1) / kBlockPaths;

    double covered = 0.0;
    double horizon = config.initial_horizon;
    for (std::size_t level = 0;; ++level) {
        const auto first_step = static_cast<long long>(std::llround(covered / step));
        const auto last_step = static_cast<long long>(std::llround(horizon / step));
        for_each_block(n_blocks, config.threads, [&](std::size_t block) {
            Engine engine = block_engine(config.seed, kArgmaxTag, block, level);
            boost::random::normal_distribution<double> normal;
            const std::size_t end = std::min(n, (block + 1) * kBlockPaths);
            for (std::size_t p = block * kBlockPaths; p < end; ++p) {
                for (std::size_t wing = 0; wing < 2; ++wing) {
                    const std::size_t s = 2 * p + wing;
                    double value = edge[s];
                    double top = best[s];
                    double loc = where[s];
                    for (long long j = first_step + 1; j <= last_step; ++j) {
                        value += sd * normal(engine) - drift;
                        if (value > top) {
                            top = value;
                            loc = static_cast<double>(j) * step;
                        }
                    }
                    edge[s] = value;
                    best[s] = top;
                    where[s] = loc;
                }
                argmax[p] = best[2 * p] >= best[2 * p + 1] ? where[2 * p] : -where[2 * p + 1];
            }
        });
        const auto inner = static_cast<std::size_t>(std::count_if(
            argmax.begin(), argmax.end(), [&](double a) { return std::abs(a) <= 0.5 * horizon; }));
        if (static_cast<double>(inner) >= kInnerShare * static_cast<double>(n)) break;
        if (2.0 * horizon > config.horizon_cap) {
            throw Error(Errc::horizon_not_converged,
                        "argmax horizon did not converge below cap " + fmt_double(config.horizon_cap));
        }
        covered = horizon;
        horizon *= 2.0;
    }
    return {std::move(argmax), horizon};
}

BesselSample simulate_bessel(int r, std::span<const double> eps, std::span<const double> probe_taus,
                             const SimulationConfig& config) {
    check_config(config);
    if (r < 1) throw Error(Errc::invalid_argument, "r must be at least 1");
    for (double e : eps) {
        if (!(e > 0.0 && e < 0.5)) throw Error(Errc::invalid_argument, "eps must lie in (0, 0.5)");
    }
    const std::size_t n = config.n_paths;
    const std::size_t points = config.bessel_points;
    const double dt = 1.0 / static_cast<double>(points);
    const double sd = std::sqrt(dt);
    const auto dim = static_cast<std::size_t>(r);

    // Grid index ranges [lo, hi] with eps <= j/points <= 1 - eps.
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (double e : eps) {
        const auto lo = static_cast<std::size_t>(std::ceil(e * static_cast<double>(points) - 1e-9));
        const auto hi = static_cast<std::size_t>(std::floor((1.0 - e) * static_cast<double>(points) + 1e-9));
        ranges.emplace_back(std::max<std::size_t>(lo, 1), std::min(hi, points - 1));
    }
    std::vector<std::size_t> probes;
    for (double tau : probe_taus) {
        if (!(tau > 0.0 && tau < 1.0)) throw Error(Errc::invalid_argument, "probe tau must lie in (0, 1)");
        probes.push_back(static_cast<std::size_t>(std::llround(tau * static_cast<double>(points))));
    }

    BesselSample out;
    out.sup.assign(eps.size(), std::vector<double>(n, 0.0));
    out.probe.assign(probes.size(), std::vector<double>(n, 0.0));
    const std::size_t n_blocks = (n + kBlockPaths - 1) / kBlockPaths;
    for_each_block(n_blocks, config.threads, [&](std::size_t block) {
        Engine engine = block_engine(config.seed, kBesselTag + static_cast<std::uint32_t>(r), block, 0);
        boost::random::normal_distribution<double> normal;
        std::vector<double> path((points + 1) * dim, 0.0);
        const std::size_t end = std::min(n, (block + 1) * kBlockPaths);
        for (std::size_t p = block * kBlockPaths; p < end; ++p) {
            for (std::size_t j = 1; j <= points; ++j) {
                for (std::size_t c = 0; c < dim; ++c) {
                    path[j * dim + c] = path[(j - 1) * dim + c] + sd * normal(engine);
                }
            }
            auto stat = [&](std::size_t j) {
                const double tau = static_cast<double>(j) * dt;
                double s = 0.0;
                for (std::size_t c = 0; c < dim; ++c) {
                    const double bridge = path[j * dim + c] - tau * path[points * dim + c];
                    s += bridge * bridge;
                }
                return s / (tau * (1.0 - tau));
            };
            for (std::size_t e = 0; e < ranges.size(); ++e) {
                double top = 0.0;
                for (std::size_t j = ranges[e].first; j <= ranges[e].second; ++j) top = std::max(top, stat(j));
                out.sup[e][p] = top;
            }
            for (std::size_t q = 0; q < probes.size(); ++q) out.probe[q][p] = stat(probes[q]);
        }
    });
    return out;
}

double argmax_quantile(double prob, const SimulationConfig& config) {
    check_prob(prob);
    auto sample = sorted_signed_argmax(config);
    return empirical_quantile(*sample, prob);
}

double argmax_critical_value(double alpha, const SimulationConfig& config) {
    check_alpha(alpha);
    auto sample = sorted_abs_argmax(config);
    return empirical_quantile(*sample, 1.0 - alpha);
}

double sup_bessel_critical(int r, double eps, double alpha, const SimulationConfig& config) {
    if (r < 1) throw Error(Errc::invalid_argument, "r must be at least 1");
    if (!(eps > 0.0 && eps < 0.5)) throw Error(Errc::invalid_argument, "eps must lie in (0, 0.5)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1)");
    auto sample = sorted_sup(r, eps, config);
    return empirical_quantile(*sample, 1.0 - alpha);
}

std::vector<QuantileTable> build_quantile_tables(int r_max, std::span<const double> eps,
                                                 std::span<const double> alphas,
                                                 const SimulationConfig& config) {
    if (r_max < 1) throw Error(Errc::invalid_argument, "r must be at least 1");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1)");
    }
    std::vector<QuantileTable> tables;

    auto argmax = simulate_argmax(config);
    std::vector<double> abs_sample = argmax.argmax;
    for (auto& v : abs_sample) v = std::abs(v);
    std::sort(abs_sample.begin(), abs_sample.end());
    QuantileTable am;
    am.law = LimitLaw::argmax_two_sided_bm;
    am.grid_step = config.argmax_step;
    am.horizon = argmax.horizon;
    am.n_paths = config.n_paths;
    am.seed = config.seed;
    for (double a : alphas) am.quantiles[1.0 - a / 2.0] = empirical_quantile(abs_sample, 1.0 - a);
    tables.push_back(am);

    for (int r = 1; r <= r_max; ++r) {
        auto sample = simulate_bessel(r, eps, {}, config);
        for (std::size_t e = 0; e < eps.size(); ++e) {
            auto& s = sample.sup[e];
            std::sort(s.begin(), s.end());
            QuantileTable t;
            t.law = LimitLaw::sup_bessel;
            t.r = r;
            t.eps = eps[e];
            t.grid_step = 1.0 / static_cast<double>(config.bessel_points);
            t.horizon = 1.0;
            t.n_paths = config.n_paths;
            t.seed = config.seed;
            for (double a : alphas) t.quantiles[1.0 - a] = empirical_quantile(s, 1.0 - a);
            tables.push_back(std::move(t));
        }
    }
    return tables;
}

void write_quantile_cache(const std::filesystem::path& path, std::span<const QuantileTable> tables) {
    std::ostringstream os;
    os << "# limit-law quantile cache; regenerate with `ccebreak tables`\n";
    os << "format = ccebreak-quantile-cache\n";
    os << "version = 1\n";
    for (const auto& t : tables) {
        os << "\n[table]\n";
        os << "law = " << (t.law == LimitLaw::sup_bessel ? "sup_bessel" : "argmax_two_sided_bm") << "\n";
        os << "r = " << t.r << "\n";
        os << "eps = " << fmt_double(t.eps) << "\n";
        os << "grid_step = " << fmt_double(t.grid_step) << "\n";
        os << "horizon = " << fmt_double(t.horizon) << "\n";
        os << "n_paths = " << t.n_paths << "\n";
        os << "seed = " << t.seed << "\n";
        for (const auto& [p, v] : t.quantiles) os << "quantile." << fmt_double(p) << " = " << fmt_double(v) << "\n";
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
        out << os.str();
        if (!out.flush()) throw Error(Errc::io_error, "cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::io_error, "cannot replace " + path.string() + ": " + ec.message());
}

std::vector<QuantileTable> read_quantile_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
    std::vector<QuantileTable> tables;
    std::string raw;
    std::size_t line_no = 0;
    bool format_ok = false;
    auto fail = [&](const std::string& why) {
        throw Error(Errc::parse_error, path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line == "[table]") {
            tables.emplace_back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        try {
            if (tables.empty()) {
                if (key == "format") {
                    if (value != "ccebreak-quantile-cache") fail("unknown format '" + value + "'");
                    format_ok = true;
                } else if (key == "version") {
                    if (value != "1") fail("unsupported version " + value);
                } else {
                    fail("unknown header key '" + key + "'");
                }
                continue;
            }
            auto& t = tables.back();
            if (key == "law") {
                if (value == "sup_bessel") t.law = LimitLaw::sup_bessel;
                else if (value == "argmax_two_sided_bm") t.law = LimitLaw::argmax_two_sided_bm;
                else fail("unknown law '" + value + "'");
            } else if (key == "r") {
                t.r = std::stoi(value);
            } else if (key == "eps") {
                t.eps = std::stod(value);
            } else if (key == "grid_step") {
                t.grid_step = std::stod(value);
            } else if (key == "horizon") {
                t.horizon = std::stod(value);
            } else if (key == "n_paths") {
                t.n_paths = std::stoull(value);
            } else if (key == "seed") {
                t.seed = std::stoull(value);
            } else if (key.rfind("quantile.", 0) == 0) {
                t.quantiles[std::stod(key.substr(9))] = std::stod(value);
            } else {
                fail("unknown key '" + key + "'");
            }
        } catch (const std::logic_error&) {
            fail("bad value '" + value + "'");
        }
    }
    if (!format_ok) throw Error(Errc::parse_error, path.string() + ": missing format header");
    return tables;
}

struct CriticalValues::State {
    std::shared_mutex mutex;
    std::vector<QuantileTable> tables;
};

CriticalValues::CriticalValues(SimulationConfig config)
    : config_(config), state_(std::make_unique<State>()) {
    check_config(config_);
}

CriticalValues::~CriticalValues() = default;

bool CriticalValues::load(const std::filesystem::path& path) {
    if (path.empty() || !std::filesystem::exists(path)) return false;
    auto tables = read_quantile_cache(path);
    std::unique_lock lock(state_->mutex);
    for (auto& t : tables) state_->tables.push_back(std::move(t));
    return true;
}

void CriticalValues::add(const QuantileTable& table) {
    std::unique_lock lock(state_->mutex);
    state_->tables.push_back(table);
}

double CriticalValues::argmax_c(double alpha) {
    check_alpha(alpha);
    {
        std::shared_lock lock(state_->mutex);
        for (const auto& t : state_->tables) {
            if (t.law != LimitLaw::argmax_two_sided_bm || t.seed != config_.seed ||
                t.n_paths != config_.n_paths || !near(t.grid_step, config_.argmax_step)) {
                continue;
            }
            for (const auto& [p, v] : t.quantiles) {
                if (near(p, 1.0 - alpha / 2.0)) return v;
            }
        }
    }
    return argmax_critical_value(alpha, config_);
}

double CriticalValues::sup_bessel(int r, double eps, double alpha) {
    {
        std::shared_lock lock(state_->mutex);
        const double step = 1.0 / static_cast<double>(config_.bessel_points);
        for (const auto& t : state_->tables) {
            if (t.law != LimitLaw::sup_bessel || t.r != r || !near(t.eps, eps) ||
                t.seed != config_.seed || t.n_paths != config_.n_paths || !near(t.grid_step, step)) {
                continue;
            }
            for (const auto& [p, v] : t.quantiles) {
                if (near(p, 1.0 - alpha)) return v;
            }
        }
    }
    return sup_bessel_critical(r, eps, alpha, config_);
}

std::filesystem::path CriticalValues::default_cache_path() { return CCEBREAK_DEFAULT_CACHE; }

}  // namespace ccebreak
