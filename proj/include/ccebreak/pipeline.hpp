#pragma once

#include <string>

#include "ccebreak/limit_dist.hpp"
#include "ccebreak/panel.hpp"
#include "ccebreak/report.hpp"

namespace ccebreak {

/// The library version string.
const char* version() noexcept;

/// Critical-value provider for a run: the configured simulation settings plus the cache file.
SimulationConfig simulation_config(const RunConfig& config);

/// Read the panel named by the config's inputs and column roles.
PanelData load_panel(const RunConfig& config);

/// R from the config's breaking-column names (all regressors when none are named).
BreakSpec break_spec_for(const PanelData& panel, const RunConfig& config);

/**
 * @brief sup-Wald test on the full sample, then, on rejection, date the break, build its
 * interval and estimate theta, then search each subsample for further breaks.
 */
Report run_detect(const RunConfig& config, const PanelData& panel, CriticalValues& critical_values);
Report run_test(const RunConfig& config, const PanelData& panel, CriticalValues& critical_values);
Report run_estimate(const RunConfig& config, const PanelData& panel, CriticalValues& critical_values);
Report run_ci(const RunConfig& config, const PanelData& panel, CriticalValues& critical_values);

/// Regenerate the critical-value cache and return the printed grid.
std::string run_tables(const RunConfig& config);

/// Run a Monte Carlo experiment, or write one generated panel when write_panel is set.
std::string run_simulate(const RunConfig& config);

/// Dispatch on config.command and return the formatted output.
std::string run_command(const RunConfig& config);

}  // namespace ccebreak
