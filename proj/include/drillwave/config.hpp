#pragma once

#include "drillwave/funnel.hpp"
#include "drillwave/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace drillwave {

enum class Engine { Explicit, Implicit, Both };
enum class ErrorMode { Direct, Measured };
enum class Integrator { RK4, RK23 };

struct GridSpec {
    std::optional<double> dxi;
    std::optional<int> n_points;
};

struct TimeSpec {
    double t_end = 10.0;
    std::optional<double> dt;     // explicit step; derived from cfl_fraction when absent
    double cfl_fraction = 0.5;    // dt ~ cfl_fraction * dxi / c, then snapped to omega/m
    int n_output_rows = 500;
    // rk4 integrates at the fixed resolved step; rk23 is an embedded 2(3)
    // pair (explicit engine only) that adapts the step to rtol/atol, capped
    // by the CFL bound.  The resolved dt seeds the first step.
    Integrator integrator = Integrator::RK4;
    double rtol = 1e-3;
    double atol = 1e-6;
};

// Everything a run needs, before grid/step resolution.
struct ExperimentConfig {
    std::string name = "experiment";
    DrillParams params;
    DampingSpec damping;
    FunnelConfig funnel;
    ReferenceSpec reference;
    GridSpec grid;
    TimeSpec time;
    Engine engine = Engine::Explicit;
    ErrorMode e_mode = ErrorMode::Direct;
    int i_sign = -1;              // sign of the delayed-difference term in I'
    std::uint64_t seed = 0;       // echoed into outputs; the dynamics are deterministic
    double cfl_max = 0.9;
};

// Concrete discretization derived from an ExperimentConfig: node count, dxi,
// and a step that divides the travel time omega exactly so delayed lookups
// land on stored samples.
struct ResolvedRun {
    int n_points = 0;
    double dxi = 0.0;
    double dt = 0.0;
    int steps_per_omega = 0;
    int n_steps = 0;
    std::vector<std::string> warnings;  // e.g. gain identities from the theory that the config breaks
};

// Validates the config and resolves the grid/step.  Throws ConfigError on
// inconsistent or CFL-violating inputs.
ResolvedRun resolve_run(const ExperimentConfig& cfg);

// Built-in experiment presets ("l1", "l10").  Throws ConfigError for unknown
// names.
ExperimentConfig preset(const std::string& name);

// --- serialization (JSON dialect) ----------------------------------------

// Parses a config document.  Unknown keys are errors (typos should not pass
// silently); a document that is empty or only whitespace yields the full
// default experiment (the "l1" table).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Fully-resolved round-trippable echo of a config, for the audit trail every
// run writes next to its outputs.
std::string dump_config(const ExperimentConfig& cfg);

} // namespace drillwave
