#include "drillwave/model.hpp"

#include "drillwave/errors.hpp"

#include <algorithm>
#include <cmath>

namespace drillwave {

double DrillParams::c() const { return std::sqrt(G / rho); }
double DrillParams::omega() const { return ell / c(); }

void DrillParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("params.") + name, "must be a positive finite number");
    };
    positive(ell, "ell");
    positive(rho, "rho");
    positive(G, "G");
    positive(J, "J");
    positive(Gamma, "Gamma");
}

namespace {

void check_position(double xi, double ell) {
    const double slack = 1e-12 * std::max(1.0, ell);
    if (xi < -slack || xi > ell + slack)
        throw ConfigError("damping", "position " + std::to_string(xi) +
                                         " outside the string domain [0, " + std::to_string(ell) + "]");
}

// Linear interpolation with end clamping; `xs` strictly increasing.
double interp_clamped(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t hi = static_cast<size_t>(it - xs.begin());
    size_t lo = hi - 1;
    double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + w * (ys[hi] - ys[lo]);
}

double interp_slope(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front() || x >= xs.back()) return 0.0;
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t hi = static_cast<size_t>(it - xs.begin());
    size_t lo = hi - 1;
    return (ys[hi] - ys[lo]) / (xs[hi] - xs[lo]);
}

} // namespace

double DampingSpec::Fd(double xi, double v) const {
    check_position(xi, ell);
    if (auto* a = std::get_if<ArctanScale>(&distributed)) return a->gain * std::atan(v);
    if (auto* t = std::get_if<DampingTable>(&distributed)) return interp_clamped(t->velocity, t->torque, v);
    return 0.0;
}

double DampingSpec::Fd_dv(double xi, double v) const {
    check_position(xi, ell);
    if (auto* a = std::get_if<ArctanScale>(&distributed)) return a->gain / (1.0 + v * v);
    if (auto* t = std::get_if<DampingTable>(&distributed)) return interp_slope(t->velocity, t->torque, v);
    return 0.0;
}

double DampingSpec::Fd_sup() const {
    if (auto* a = std::get_if<ArctanScale>(&distributed)) return a->gain * (std::acos(-1.0) / 2.0);
    if (auto* t = std::get_if<DampingTable>(&distributed)) {
        double m = 0.0;
        for (double f : t->torque) m = std::max(m, std::abs(f));
        return m;
    }
    return 0.0;
}

double DampingSpec::Fd_dv_sup() const {
    if (auto* a = std::get_if<ArctanScale>(&distributed)) return a->gain;  // slope at v = 0
    if (auto* t = std::get_if<DampingTable>(&distributed)) {
        double m = 0.0;
        for (size_t i = 1; i < t->velocity.size(); ++i)
            m = std::max(m, (t->torque[i] - t->torque[i - 1]) / (t->velocity[i] - t->velocity[i - 1]));
        return m;
    }
    return 0.0;
}

double DampingSpec::Fe(double v) const {
    if (auto* rc = std::get_if<RegularizedCoulomb>(&boundary)) {
        const double s = std::sqrt(v * v + rc->eps * rc->eps);
        return -rc->amplitude * (v / s) * (1.0 + rc->bump * std::exp(-s / rc->decay));
    }
    return 0.0;
}

double DampingSpec::Fe_dv(double v) const {
    if (auto* rc = std::get_if<RegularizedCoulomb>(&boundary)) {
        const double e2 = rc->eps * rc->eps;
        const double s = std::sqrt(v * v + e2);
        const double bump = rc->bump * std::exp(-s / rc->decay);
        // d/dv [v/s] = eps^2 / s^3,  d/dv [bump] = -bump * v / (s * decay)
        return -rc->amplitude * ((e2 / (s * s * s)) * (1.0 + bump) -
                                 (v * v) / (s * s) * bump / rc->decay);
    }
    return 0.0;
}

double DampingSpec::Fe_sup() const {
    if (auto* rc = std::get_if<RegularizedCoulomb>(&boundary))
        return rc->amplitude * (1.0 + rc->bump);
    return 0.0;
}

double DampingSpec::Fe_dv_sup() const {
    if (auto* rc = std::get_if<RegularizedCoulomb>(&boundary))
        return rc->amplitude * (1.0 + rc->bump) / rc->eps;
    return 0.0;
}

void DampingSpec::validate() const {
    if (auto* a = std::get_if<ArctanScale>(&distributed)) {
        if (!(a->gain >= 0.0) || !std::isfinite(a->gain))
            throw ConfigError("damping.distributed.gain", "must be a nonnegative finite number");
    }
    if (auto* t = std::get_if<DampingTable>(&distributed)) {
        if (t->velocity.size() != t->torque.size() || t->velocity.size() < 2)
            throw ConfigError("damping.distributed.table", "needs matching velocity/torque columns (>= 2 rows)");
        for (size_t i = 1; i < t->velocity.size(); ++i) {
            if (!(t->velocity[i] > t->velocity[i - 1]))
                throw ConfigError("damping.distributed.table", "velocity column must be strictly increasing");
            if (t->torque[i] < t->torque[i - 1])
                throw ConfigError("damping.distributed.table", "torque column must be nondecreasing (monotone law)");
        }
        if (std::abs(interp_clamped(t->velocity, t->torque, 0.0)) > 1e-12)
            throw ConfigError("damping.distributed.table", "law must interpolate to zero torque at v = 0");
    }
    if (auto* rc = std::get_if<RegularizedCoulomb>(&boundary)) {
        if (!(rc->amplitude >= 0.0)) throw ConfigError("damping.boundary.A", "must be nonnegative");
        if (!(rc->eps > 0.0)) throw ConfigError("damping.boundary.eps", "must be positive");
        if (!(rc->bump >= 0.0)) throw ConfigError("damping.boundary.h", "must be nonnegative");
        if (!(rc->decay > 0.0)) throw ConfigError("damping.boundary.Delta", "must be positive");
    }
    if (!(ell > 0.0)) throw ConfigError("damping.ell", "must be positive");
}

double ReferenceSpec::value(double t) const {
    if (auto* c = std::get_if<double>(&signal)) return *c;
    const auto& tab = std::get<Table>(signal);
    return interp_clamped(tab.t, tab.y, t);
}

double ReferenceSpec::derivative(double t) const {
    if (std::holds_alternative<double>(signal)) return 0.0;
    const auto& tab = std::get<Table>(signal);
    return interp_slope(tab.t, tab.y, t);
}

double ReferenceSpec::sup_abs() const {
    if (auto* c = std::get_if<double>(&signal)) return std::abs(*c);
    // clamped interpolation never leaves the tabulated range
    const auto& tab = std::get<Table>(signal);
    double m = 0.0;
    for (double y : tab.y) m = std::max(m, std::abs(y));
    return m;
}

void ReferenceSpec::validate() const {
    if (auto* c = std::get_if<double>(&signal)) {
        if (!std::isfinite(*c)) throw ConfigError("reference.value", "must be finite");
        return;
    }
    const auto& tab = std::get<Table>(signal);
    if (tab.t.size() != tab.y.size() || tab.t.size() < 2)
        throw ConfigError("reference.table", "needs matching t/y columns (>= 2 rows)");
    for (size_t i = 1; i < tab.t.size(); ++i)
        if (!(tab.t[i] > tab.t[i - 1]))
            throw ConfigError("reference.table", "time column must be strictly increasing");
    for (double y : tab.y)
        if (!std::isfinite(y)) throw ConfigError("reference.table", "values must be finite");
}

} // namespace drillwave
