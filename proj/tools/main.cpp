#include "drillwave/config.hpp"
#include "drillwave/errors.hpp"
#include "drillwave/runner.hpp"

#include <CLI11.hpp>

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace {

// Exit codes: 0 ok, 1 usage/config/numerics, 2 funnel violation.
constexpr int kExitError = 1;
constexpr int kExitViolation = 2;

struct CommonFlags {
    std::string engine;
    std::string e_mode;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--engine", f.engine, "Integrator: explicit | implicit | both");
    cmd->add_option("--e-mode", f.e_mode, "Error signal source: direct | measured");
    cmd->add_option("--out", f.out_dir, "Output directory for csv/json artifacts")
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "Seed echoed into the run artifacts")
        ->each([&f](const std::string&) { f.seed_set = true; });
}

void apply_overrides(drillwave::ExperimentConfig& cfg, const CommonFlags& f) {
    if (!f.engine.empty()) {
        if (f.engine == "explicit") cfg.engine = drillwave::Engine::Explicit;
        else if (f.engine == "implicit") cfg.engine = drillwave::Engine::Implicit;
        else if (f.engine == "both") cfg.engine = drillwave::Engine::Both;
        else throw drillwave::ConfigError("engine", "unknown engine '" + f.engine + "'");
    }
    if (!f.e_mode.empty()) {
        if (f.e_mode == "direct") cfg.e_mode = drillwave::ErrorMode::Direct;
        else if (f.e_mode == "measured") cfg.e_mode = drillwave::ErrorMode::Measured;
        else throw drillwave::ConfigError("e_mode", "unknown error mode '" + f.e_mode + "'");
    }
    if (f.seed_set) cfg.seed = f.seed;
}

int run_one(drillwave::ExperimentConfig cfg, const CommonFlags& flags) {
    apply_overrides(cfg, flags);
    const drillwave::RunOutput out = drillwave::run_experiment(cfg, flags.out_dir);
    for (const auto& w : out.resolved.warnings)
        std::fprintf(stderr, "warning [%s]: %s\n", cfg.name.c_str(), w.c_str());
    for (const auto& oc : out.outcomes) {
        std::printf("%s/%s: margin=%.6g max|e|=%.6g terminal=%.3g wall=%.2fs%s%s\n",
                    cfg.name.c_str(), oc.engine.c_str(), oc.summary.min_funnel_margin,
                    oc.summary.max_abs_e, oc.summary.terminal_tracking_error,
                    oc.summary.wall_seconds, oc.csv_path.empty() ? "" : " -> ",
                    oc.csv_path.c_str());
    }
    if (!std::isnan(out.cross_engine_max_dy))
        std::printf("%s: cross-engine max|dy|=%.6g\n", cfg.name.c_str(), out.cross_engine_max_dy);
    return 0;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> paths;
    const int rc = ::glob(pattern.c_str(), GLOB_TILDE, nullptr, &g);
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH)
        throw drillwave::ConfigError("sweep", "glob failed for pattern '" + pattern + "'");
    return paths;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Funnel-controlled drill-string simulator"};
    app.require_subcommand(1);

    CommonFlags run_flags, preset_flags, sweep_flags;
    std::string run_path, preset_name, validate_path;
    std::vector<std::string> sweep_patterns;

    auto* cmd_run = app.add_subcommand("run", "Integrate a config file");
    cmd_run->add_option("config", run_path, "Path to a config json")->required();
    add_common(cmd_run, run_flags);

    auto* cmd_preset = app.add_subcommand("preset", "Integrate a built-in experiment");
    cmd_preset->add_option("name", preset_name, "Preset name: l1 | l10")->required();
    add_common(cmd_preset, preset_flags);

    auto* cmd_validate = app.add_subcommand("validate", "Check a config without running it");
    cmd_validate->add_option("config", validate_path, "Path to a config json")->required();

    auto* cmd_sweep = app.add_subcommand("sweep", "Run every config matching the glob(s)");
    cmd_sweep->add_option("patterns", sweep_patterns, "Config globs, e.g. 'cfgs/*.json'")
        ->required();
    add_common(cmd_sweep, sweep_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            return run_one(drillwave::load_config_file(run_path), run_flags);
        }
        if (cmd_preset->parsed()) {
            return run_one(drillwave::preset(preset_name), preset_flags);
        }
        if (cmd_validate->parsed()) {
            const auto cfg = drillwave::load_config_file(validate_path);
            const auto run = drillwave::resolve_run(cfg);
            std::printf("%s: ok (n=%d, dxi=%.6g, dt=%.6g, steps=%d)\n", cfg.name.c_str(),
                        run.n_points, run.dxi, run.dt, run.n_steps);
            for (const auto& w : run.warnings)
                std::fprintf(stderr, "warning [%s]: %s\n", cfg.name.c_str(), w.c_str());
            return 0;
        }
        if (cmd_sweep->parsed()) {
            std::vector<std::string> files;
            for (const auto& pat : sweep_patterns) {
                auto got = expand_glob(pat);
                files.insert(files.end(), got.begin(), got.end());
            }
            if (files.empty()) {
                std::fprintf(stderr, "sweep: no configs matched\n");
                return kExitError;
            }
            int worst = 0;
            for (const auto& path : files) {
                try {
                    run_one(drillwave::load_config_file(path), sweep_flags);
                } catch (const drillwave::FunnelViolation& ex) {
                    std::fprintf(stderr, "%s: funnel violation: %s\n", path.c_str(), ex.what());
                    worst = std::max(worst, kExitViolation);
                } catch (const std::exception& ex) {
                    std::fprintf(stderr, "%s: error: %s\n", path.c_str(), ex.what());
                    worst = std::max(worst, kExitError);
                }
            }
            return worst;
        }
    } catch (const drillwave::FunnelViolation& ex) {
        std::fprintf(stderr, "funnel violation: %s\n", ex.what());
        return kExitViolation;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return kExitError;
    }
    return kExitError;
}
