#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xfit/output.hpp"
#include "xfit/simulation.hpp"

namespace xfit {

enum class RunMode { simulate, estimate };

struct RunConfig {
    RunMode mode = RunMode::simulate;
    SimulationConfig simulation;  // dgp.n, reps, folds, seed, learners, ...
    std::filesystem::path input;  // estimate mode
    std::filesystem::path output_dir = "xfit_out";
    FilterSpec filter;
    FilterScope filter_scope = FilterScope::run_level;
    std::vector<QBounds> q_bounds{{0.0, 0.05}, {0.0, 0.2}};

    void validate() const;
};

/// Parses a config document. Unknown keys are rejected; errors carry the key
/// path (e.g. "learners[1].trees").
RunConfig parse_config_json(const Json& doc);

/// Reads --config (if given), overlays the other flags and parses the result.
/// Returns false when help was requested (text written to `help_out`).
bool parse_command_line(int argc, const char* const* argv, RunConfig& config, std::string& help_out);

/// Expands bare *_trans names into one kind per q_bounds entry.
std::vector<EstimatorKind> expand_estimators(const std::vector<std::string>& names,
                                             const std::vector<QBounds>& q_bounds);

}  // namespace xfit
