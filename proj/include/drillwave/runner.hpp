#pragma once

#include "drillwave/config.hpp"
#include "drillwave/fdsolver.hpp"

#include <limits>
#include <string>
#include <vector>

namespace drillwave {

struct EngineOutcome {
    std::string engine;
    RunSummary summary;
    SimTrace trace;
    std::string csv_path;  // empty when no output directory was given
};

struct RunOutput {
    ResolvedRun resolved;
    std::vector<EngineOutcome> outcomes;
    // max_t |y_explicit(t) - y_implicit(t)| over the shared output rows;
    // NaN unless both engines ran.
    double cross_engine_max_dy = std::numeric_limits<double>::quiet_NaN();
};

// Resolves the config and integrates with the configured engine(s).  When
// out_dir is non-empty it is created if needed and receives, per run,
//   <name>_<engine>.csv      the trace
//   <name>_config.json       the config echo (parseable back)
//   <name>_summary.json      resolution, warnings and scalar summaries
// FunnelViolation and config errors propagate to the caller.
RunOutput run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// The <name>_summary.json document (also handy for printing).
std::string summary_json(const ExperimentConfig& cfg, const RunOutput& out);

} // namespace drillwave
