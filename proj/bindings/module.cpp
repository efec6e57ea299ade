#include "drillwave/config.hpp"
#include "drillwave/errors.hpp"
#include "drillwave/funnel.hpp"
#include "drillwave/monotone.hpp"
#include "drillwave/runner.hpp"
#include "drillwave/trace.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

namespace py = pybind11;
using namespace drillwave;

namespace {

py::dict summary_dict(const RunSummary& s) {
    py::dict d;
    d["engine"] = s.engine;
    d["min_funnel_margin"] = s.min_funnel_margin;
    d["max_abs_e"] = s.max_abs_e;
    d["max_abs_v"] = s.max_abs_v;
    d["max_abs_u"] = s.max_abs_u;
    d["max_abs_I"] = s.max_abs_I;
    d["terminal_tracking_error"] = s.terminal_tracking_error;
    d["wall_seconds"] = s.wall_seconds;
    d["steps_taken"] = s.steps_taken;
    d["steps_rejected"] = s.steps_rejected;
    return d;
}

py::dict trace_dict(const SimTrace& trace) {
    const std::size_t n = trace.rows.size();
    std::vector<double> t(n), y(n), y_ref(n), e(n), w(n), psi(n), v(n), u(n), z(n), I(n), en(n);
    for (std::size_t i = 0; i < n; ++i) {
        const TraceRow& r = trace.rows[i];
        t[i] = r.t; y[i] = r.y; y_ref[i] = r.y_ref; e[i] = r.e; w[i] = r.w;
        psi[i] = r.psi_shift; v[i] = r.v; u[i] = r.u; z[i] = r.z; I[i] = r.I; en[i] = r.energy;
    }
    py::dict d;
    d["t"] = t; d["y"] = y; d["y_ref"] = y_ref; d["e"] = e; d["w"] = w;
    d["psi_shift"] = psi; d["v"] = v; d["u"] = u; d["z"] = z; d["I"] = I; d["energy"] = en;
    return d;
}

py::dict run_impl(const std::string& config_json, const std::string& out_dir, bool with_trace) {
    const ExperimentConfig cfg = parse_config(config_json);
    const RunOutput out = run_experiment(cfg, out_dir);
    py::dict d;
    d["name"] = cfg.name;
    py::dict res;
    res["n_points"] = out.resolved.n_points;
    res["dxi"] = out.resolved.dxi;
    res["dt"] = out.resolved.dt;
    res["steps_per_omega"] = out.resolved.steps_per_omega;
    res["n_steps"] = out.resolved.n_steps;
    res["warnings"] = out.resolved.warnings;
    d["resolved"] = res;
    py::list engines;
    for (const auto& oc : out.outcomes) {
        py::dict e = summary_dict(oc.summary);
        e["csv"] = oc.csv_path;
        if (with_trace) e["trace"] = trace_dict(oc.trace);
        engines.append(e);
    }
    d["engines"] = engines;
    if (!std::isnan(out.cross_engine_max_dy)) d["cross_engine_max_dy"] = out.cross_engine_max_dy;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Funnel-controlled drill-string simulation core";

    py::register_exception<FunnelViolation>(m, "FunnelViolation", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DelayBufferError>(m, "DelayBufferError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    m.def("preset_json", [](const std::string& name) { return dump_config(preset(name)); },
          py::arg("name"), "Built-in experiment config ('l1' or 'l10') as a json document");

    m.def("normalize_config",
          [](const std::string& text) { return dump_config(parse_config(text)); },
          py::arg("config_json"),
          "Parse a (possibly partial) config document and echo the fully resolved one");

    m.def("validate",
          [](const std::string& text) {
              const ExperimentConfig cfg = parse_config(text);
              const ResolvedRun run = resolve_run(cfg);
              py::dict d;
              d["name"] = cfg.name;
              d["n_points"] = run.n_points;
              d["dxi"] = run.dxi;
              d["dt"] = run.dt;
              d["steps_per_omega"] = run.steps_per_omega;
              d["n_steps"] = run.n_steps;
              d["warnings"] = run.warnings;
              return d;
          },
          py::arg("config_json"), "Resolve a config without running it");

    m.def("run", &run_impl, py::arg("config_json"), py::arg("out_dir") = std::string(),
          py::arg("with_trace") = true,
          "Integrate the configured experiment; returns summaries and trace columns");

    m.def("trace_csv",
          [](const std::string& config_json) {
              const ExperimentConfig cfg = parse_config(config_json);
              const RunOutput out = run_experiment(cfg, "");
              return trace_to_csv(out.outcomes.front().trace);
          },
          py::arg("config_json"), "Run and return the first engine's trace as csv text");

    // Scalar controller pieces, mainly for cross-checking from python.
    m.def("shaping_p", &shaping_p, py::arg("t"), py::arg("t_shaping"));
    m.def("error_transform", &error_transform, py::arg("e"), py::arg("k"),
          py::arg("t_diag") = 0.0);
    m.def("solve_e_measured",
          [](double R, double psi_tmo, double k, double c) {
              return solve_e_measured(R, psi_tmo, k, c).e;
          },
          py::arg("R"), py::arg("psi_tmo"), py::arg("k"), py::arg("c"));

    m.def("check_skew",
          [](int n_points, int n_samples, std::uint64_t seed) {
              DrillParams p;
              DampingSpec d;
              d.boundary = RegularizedCoulomb{};
              EnergySystem sys(p, d, n_points);
              return check_skew(sys, n_samples, seed);
          },
          py::arg("n_points") = 51, py::arg("n_samples") = 100, py::arg("seed") = 12345,
          "Skew-structure residual of the energy-space operator on random states");
}
