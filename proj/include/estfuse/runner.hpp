#pragma once

#include <vector>

#include "estfuse/config.hpp"
#include "estfuse/simgauss.hpp"

namespace estfuse {

inline constexpr const char* kToolVersion = "estfuse 0.1.0";

// Executes the configured experiment and writes its CSV/SVG artifacts into
// the output directory. Returns a process exit code: 0 on success, 3 on
// total runtime failure. Per-scenario failures land in errors.csv.
int run(const RunConfig& config);

// Scenario builders shared by the runner and the acceptance suite.
GaussianScenario make_curve_scenario(const RunConfig& cfg);
// Cartesian product of the configured grid axes, in enumeration order;
// includes invalid combinations (callers skip and log them).
std::vector<GaussianScenario> make_grid_scenarios(const RunConfig& cfg);

} // namespace estfuse
