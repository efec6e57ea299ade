#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace drillwave {

// One output sample of a closed-loop run.  `w` is the funnel-centered error
// y(t) - y_ref(t) + I(t + omega); it needs the compensator value one travel
// time in the future, so near the end of the run it is NaN ("not yet
// observable") rather than silently wrong.
struct TraceRow {
    double t = 0.0;
    double y = 0.0;
    double y_ref = 0.0;
    double e = 0.0;
    double w = 0.0;
    double psi_shift = 0.0;  // psi(t - omega)
    double v = 0.0;
    double u = 0.0;
    double z = 0.0;
    double I = 0.0;
    double energy = 0.0;
};

struct SimTrace {
    std::vector<TraceRow> rows;

    // Smallest psi(t-omega) - |y(t-omega) - y_ref(t-omega) + I(t)| over the
    // rows; positive means the funnel never came close to being violated.
    double min_funnel_margin() const;
    double max_abs_e() const;
};

// Scalar roll-up of a run, printed by the CLI and exported to JSON.
struct RunSummary {
    std::string engine;
    double min_funnel_margin = 0.0;
    double max_abs_e = 0.0;
    double max_abs_v = 0.0;
    double max_abs_u = 0.0;
    double max_abs_I = 0.0;
    double terminal_tracking_error = 0.0;  // |y(T) - y_ref(T)|
    double wall_seconds = 0.0;
    int steps_taken = 0;     // accepted steps (== n_steps for the fixed-step loops)
    int steps_rejected = 0;  // adaptive trial steps that failed the error test
};

// CSV with the fixed column set above, full double precision (%.17g), one
// header line.  Deterministic byte-for-byte for identical traces.
std::string trace_to_csv(const SimTrace& trace);
void write_csv_file(const SimTrace& trace, const std::string& path);

// Full-resolution per-step record kept by both engines while integrating.
// Output rows are sampled from this afterwards, so the trace density is
// independent of the internal step size.
struct StepSeries {
    std::vector<double> t, y, y_ref, e, psi_shift, v, u, z, I, energy;

    void reserve(std::size_t n);
    void push(double t_, double y_, double y_ref_, double e_, double psi_, double v_, double u_,
              double z_, double I_, double energy_);
    double interp(const std::vector<double>& col, double at) const;
};

// n_rows samples at uniform times over [0, t_end] (endpoints included).
// The w column needs I(t + omega); rows with t + omega > t_end get NaN there.
SimTrace sample_uniform(const StepSeries& series, int n_rows, double t_end, double omega);

} // namespace drillwave
