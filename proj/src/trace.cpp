#include "drillwave/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace drillwave {

double SimTrace::min_funnel_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) m = std::min(m, r.psi_shift * (1.0 - std::abs(r.e)));
    return m;
}

double SimTrace::max_abs_e() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, std::abs(r.e));
    return m;
}

namespace {
void append_g17(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}
} // namespace

std::string trace_to_csv(const SimTrace& trace) {
    std::string out = "t,y,y_ref,e,w,psi_shift,v,u,z,I,energy\n";
    for (const auto& r : trace.rows) {
        const double cols[] = {r.t, r.y, r.y_ref, r.e, r.w, r.psi_shift, r.v, r.u, r.z, r.I, r.energy};
        for (std::size_t i = 0; i < std::size(cols); ++i) {
            if (i) out += ',';
            append_g17(out, cols[i]);
        }
        out += '\n';
    }
    return out;
}

void write_csv_file(const SimTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << trace_to_csv(trace);
}

void StepSeries::reserve(std::size_t n) {
    for (auto* col : {&t, &y, &y_ref, &e, &psi_shift, &v, &u, &z, &I, &energy}) col->reserve(n);
}

void StepSeries::push(double t_, double y_, double y_ref_, double e_, double psi_, double v_,
                      double u_, double z_, double I_, double energy_) {
    t.push_back(t_);
    y.push_back(y_);
    y_ref.push_back(y_ref_);
    e.push_back(e_);
    psi_shift.push_back(psi_);
    v.push_back(v_);
    u.push_back(u_);
    z.push_back(z_);
    I.push_back(I_);
    energy.push_back(energy_);
}

double StepSeries::interp(const std::vector<double>& col, double at) const {
    if (at <= t.front()) return col.front();
    if (at >= t.back()) return col.back();
    auto it = std::upper_bound(t.begin(), t.end(), at);
    std::size_t hi = static_cast<std::size_t>(it - t.begin());
    std::size_t lo = hi - 1;
    const double w = (at - t[lo]) / (t[hi] - t[lo]);
    return col[lo] + w * (col[hi] - col[lo]);
}

SimTrace sample_uniform(const StepSeries& series, int n_rows, double t_end, double omega) {
    SimTrace out;
    out.rows.reserve(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) {
        const double at = (n_rows == 1) ? 0.0 : t_end * static_cast<double>(i) / (n_rows - 1);
        TraceRow r;
        r.t = at;
        r.y = series.interp(series.y, at);
        r.y_ref = series.interp(series.y_ref, at);
        r.e = series.interp(series.e, at);
        r.psi_shift = series.interp(series.psi_shift, at);
        r.v = series.interp(series.v, at);
        r.u = series.interp(series.u, at);
        r.z = series.interp(series.z, at);
        r.I = series.interp(series.I, at);
        r.energy = series.interp(series.energy, at);
        r.w = (at + omega <= t_end) ? r.y - r.y_ref + series.interp(series.I, at + omega)
                                    : std::numeric_limits<double>::quiet_NaN();
        out.rows.push_back(r);
    }
    return out;
}

} // namespace drillwave
