#include "drillwave/config.hpp"

#include "drillwave/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace drillwave {

namespace {

bool almost_equal(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

std::string engine_name(Engine e) {
    switch (e) {
        case Engine::Explicit: return "explicit";
        case Engine::Implicit: return "implicit";
        case Engine::Both: return "both";
    }
    return "explicit";
}

Engine engine_from(const std::string& s) {
    if (s == "explicit") return Engine::Explicit;
    if (s == "implicit") return Engine::Implicit;
    if (s == "both") return Engine::Both;
    throw ConfigError("engine", "unknown engine '" + s + "' (explicit | implicit | both)");
}

std::string e_mode_name(ErrorMode m) {
    return m == ErrorMode::Direct ? "direct" : "measured";
}

ErrorMode e_mode_from(const std::string& s) {
    if (s == "direct") return ErrorMode::Direct;
    if (s == "measured") return ErrorMode::Measured;
    throw ConfigError("e_mode", "unknown error mode '" + s + "' (direct | measured)");
}

std::string integrator_name(Integrator i) {
    return i == Integrator::RK23 ? "rk23" : "rk4";
}

Integrator integrator_from(const std::string& s) {
    if (s == "rk4") return Integrator::RK4;
    if (s == "rk23") return Integrator::RK23;
    throw ConfigError("time.integrator", "unknown integrator '" + s + "' (rk4 | rk23)");
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known)
            throw ConfigError(where.empty() ? it.key() : where + "." + it.key(),
                              "unknown key (typo?)");
    }
}

double want_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    return v.get<double>();
}

int want_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
    return v.get<int>();
}

std::vector<double> want_array(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) out.push_back(want_number(x, where));
    return out;
}

} // namespace

ResolvedRun resolve_run(const ExperimentConfig& cfg) {
    cfg.params.validate();
    cfg.damping.validate();
    cfg.funnel.validate();
    cfg.reference.validate();
    if (!almost_equal(cfg.damping.ell, cfg.params.ell, 1e-12))
        throw ConfigError("damping.ell", "damping domain length disagrees with params.ell");
    if (cfg.i_sign != -1 && cfg.i_sign != 1)
        throw ConfigError("i_sign", "must be -1 or +1");
    if (!(cfg.cfl_max > 0.0 && cfg.cfl_max <= 1.0))
        throw ConfigError("cfl_max", "must lie in (0, 1]");
    if (!(cfg.time.t_end > 0.0)) throw ConfigError("time.t_end", "must be positive");
    if (cfg.time.n_output_rows < 2) throw ConfigError("time.n_output_rows", "need at least 2 rows");
    if (!(cfg.time.cfl_fraction > 0.0 && cfg.time.cfl_fraction <= cfg.cfl_max))
        throw ConfigError("time.cfl_fraction", "must lie in (0, cfl_max]");
    if (!(cfg.time.rtol > 0.0)) throw ConfigError("time.rtol", "must be positive");
    if (!(cfg.time.atol > 0.0)) throw ConfigError("time.atol", "must be positive");
    if (cfg.time.integrator == Integrator::RK23 && cfg.engine == Engine::Implicit)
        throw ConfigError("time.integrator",
                          "the adaptive 2(3) pair runs on the explicit engine; use engine "
                          "'explicit' or 'both'");

    ResolvedRun run;

    // Grid: node count wins when both are given, but they must agree.
    const double ell = cfg.params.ell;
    int n = 0;
    if (cfg.grid.n_points) {
        n = *cfg.grid.n_points;
        if (cfg.grid.dxi && !almost_equal(ell / (n - 1), *cfg.grid.dxi, 1e-9))
            throw ConfigError("grid", "dxi and n_points describe different grids");
    } else {
        const double dxi = cfg.grid.dxi.value_or(0.02);
        if (!(dxi > 0.0)) throw ConfigError("grid.dxi", "must be positive");
        n = static_cast<int>(std::lround(ell / dxi)) + 1;
    }
    if (n < 5) throw ConfigError("grid", "need at least 5 nodes for the boundary stencils");
    run.n_points = n;
    run.dxi = ell / (n - 1);

    // Step: start from the requested step (or the CFL fraction), clamp by the
    // explicit-engine stability bounds, then snap to an exact divisor of the
    // travel time so delayed samples always land on stored nodes.
    const double c = cfg.params.c();
    const double omega = cfg.params.omega();
    double target = cfg.time.dt ? *cfg.time.dt : cfg.time.cfl_fraction * run.dxi / c;
    if (!(target > 0.0)) throw ConfigError("time.dt", "must be positive");

    const bool explicit_engine = (cfg.engine != Engine::Implicit);
    if (explicit_engine) {
        // The friction laws are steep near v = 0 (regularized Coulomb), which
        // binds the step long before the CFL number does.
        const double lam =
            std::max(cfg.damping.Fd_dv_sup(), cfg.damping.Fe_dv_sup() / cfg.params.J);
        if (lam > 0.0) {
            const double dt_stiff = 2.0 / lam;
            if (target > dt_stiff) {
                run.warnings.push_back(
                    "step reduced from " + std::to_string(target) + " to " +
                    std::to_string(dt_stiff) + " by the friction stiffness bound");
                target = dt_stiff;
            }
        }
        const double dt_cfl = cfg.cfl_max * run.dxi / c;
        if (target > dt_cfl) {
            if (cfg.time.dt) throw ConfigError("time.dt", "CFL number exceeds cfl_max");
            target = dt_cfl;
        }

        // The controller loop is stiff in its own right: near the funnel floor
        // d the compensator reacts to e through the transform slope, giving a
        // local rate of about alpha + beta * v'(e) / d.  How far up the
        // transform the loop settles is set by the input the plant demands in
        // sustained rotation -- boundary friction through the bit coupling,
        // distributed drag accumulated over the string, plus the spun-up
        // string's own (1/c) z term.  Under-resolving that mode does not blow
        // up; it quietly amplifies the swing around the settled error until
        // the funnel is (spuriously) violated.
        const double v_env = cfg.damping.Fe_sup() / cfg.params.Gamma +
                             cfg.damping.Fd_sup() * ell +
                             (cfg.reference.sup_abs() + cfg.funnel.psi.d) / c;
        if (v_env > 0.0) {
            const double k = cfg.funnel.k;
            const double e_env = (std::sqrt(k * k + 4.0 * v_env * v_env) - k) / (2.0 * v_env);
            const double one_m = 1.0 - e_env * e_env;
            const double slope = k * (1.0 + e_env * e_env) / (one_m * one_m);
            const double dt_loop = 1.0 / (cfg.funnel.alpha + cfg.funnel.beta * slope / cfg.funnel.psi.d);
            if (target > dt_loop) {
                if (cfg.time.dt) {
                    run.warnings.push_back("requested step " + std::to_string(target) +
                                           " under-resolves the controller stiffness (wants <= " +
                                           std::to_string(dt_loop) + "); keeping it");
                } else {
                    run.warnings.push_back("step reduced from " + std::to_string(target) + " to " +
                                           std::to_string(dt_loop) +
                                           " by the controller stiffness bound");
                    target = dt_loop;
                }
            }
        }
    }

    run.steps_per_omega = std::max(1, static_cast<int>(std::ceil(omega / target - 1e-12)));
    run.dt = omega / run.steps_per_omega;
    if (cfg.time.dt && !almost_equal(run.dt, *cfg.time.dt, 1e-9))
        run.warnings.push_back("dt snapped to omega/" + std::to_string(run.steps_per_omega) +
                               " = " + std::to_string(run.dt) +
                               " so delays land on whole steps");
    if (explicit_engine && c * run.dt / run.dxi > cfg.cfl_max + 1e-12)
        throw ConfigError("time.dt", "CFL number exceeds cfl_max after delay snapping");

    run.n_steps = static_cast<int>(std::ceil(cfg.time.t_end / run.dt - 1e-12));

    // Identities the delay compensator theory rests on; breaking them is
    // allowed but worth flagging.
    const auto& f = cfg.funnel;
    if (!almost_equal(f.beta, c * f.alpha, 1e-9))
        run.warnings.push_back("beta != c * alpha: compensator does not cancel the reflected wave exactly");
    const double alpha_star = cfg.params.G * cfg.params.Gamma / (c * cfg.params.J);
    if (!almost_equal(f.alpha, alpha_star, 1e-9))
        run.warnings.push_back("alpha != G*Gamma/(c*J): compensator decay mismatched to the bit coupling");

    return run;
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.damping.distributed = ArctanScale{0.3};
    cfg.damping.boundary = RegularizedCoulomb{};
    cfg.reference.signal = 5.0;
    cfg.grid.dxi = 0.02;

    if (name == "l1") {
        cfg.name = "l1";
        cfg.params.ell = 1.0;
        cfg.damping.ell = 1.0;
        cfg.funnel.alpha = 1.0;
        cfg.funnel.beta = 1.0;
        cfg.time.t_end = 10.0;
        return cfg;
    }
    if (name == "l10") {
        cfg.name = "l10";
        cfg.params.ell = 10.0;
        cfg.damping.ell = 10.0;
        cfg.funnel.alpha = 1.2;
        cfg.funnel.beta = 1.2;
        cfg.time.t_end = 100.0;
        return cfg;
    }
    throw ConfigError("preset", "unknown preset '" + name + "' (l1 | l10)");
}

namespace {

void parse_params(const json& j, DrillParams& p) {
    reject_unknown(j, "params", {"ell", "rho", "G", "J", "Gamma"});
    if (j.contains("ell")) p.ell = want_number(j["ell"], "params.ell");
    if (j.contains("rho")) p.rho = want_number(j["rho"], "params.rho");
    if (j.contains("G")) p.G = want_number(j["G"], "params.G");
    if (j.contains("J")) p.J = want_number(j["J"], "params.J");
    if (j.contains("Gamma")) p.Gamma = want_number(j["Gamma"], "params.Gamma");
}

void parse_damping(const json& j, DampingSpec& d) {
    reject_unknown(j, "damping", {"distributed", "boundary"});
    if (j.contains("distributed")) {
        const json& g = j["distributed"];
        reject_unknown(g, "damping.distributed", {"type", "gain", "velocity", "torque"});
        const std::string type = g.value("type", "arctan");
        if (type == "none") {
            d.distributed = std::monostate{};
        } else if (type == "arctan") {
            ArctanScale a;
            if (g.contains("gain")) a.gain = want_number(g["gain"], "damping.distributed.gain");
            d.distributed = a;
        } else if (type == "table") {
            DampingTable t;
            if (!g.contains("velocity") || !g.contains("torque"))
                throw ConfigError("damping.distributed", "table law needs velocity and torque arrays");
            t.velocity = want_array(g["velocity"], "damping.distributed.velocity");
            t.torque = want_array(g["torque"], "damping.distributed.torque");
            d.distributed = t;
        } else {
            throw ConfigError("damping.distributed.type",
                              "unknown law '" + type + "' (none | arctan | table)");
        }
    }
    if (j.contains("boundary")) {
        const json& g = j["boundary"];
        reject_unknown(g, "damping.boundary", {"type", "amplitude", "eps", "bump", "decay"});
        const std::string type = g.value("type", "coulomb");
        if (type == "none") {
            d.boundary = std::monostate{};
        } else if (type == "coulomb") {
            RegularizedCoulomb rc;
            if (g.contains("amplitude")) rc.amplitude = want_number(g["amplitude"], "damping.boundary.amplitude");
            if (g.contains("eps")) rc.eps = want_number(g["eps"], "damping.boundary.eps");
            if (g.contains("bump")) rc.bump = want_number(g["bump"], "damping.boundary.bump");
            if (g.contains("decay")) rc.decay = want_number(g["decay"], "damping.boundary.decay");
            d.boundary = rc;
        } else {
            throw ConfigError("damping.boundary.type", "unknown law '" + type + "' (none | coulomb)");
        }
    }
}

void parse_funnel(const json& j, FunnelConfig& f) {
    reject_unknown(j, "funnel", {"a", "b", "d", "k", "alpha", "beta", "v_hat", "t_shaping"});
    if (j.contains("a")) f.psi.a = want_number(j["a"], "funnel.a");
    if (j.contains("b")) f.psi.b = want_number(j["b"], "funnel.b");
    if (j.contains("d")) f.psi.d = want_number(j["d"], "funnel.d");
    if (j.contains("k")) f.k = want_number(j["k"], "funnel.k");
    if (j.contains("alpha")) f.alpha = want_number(j["alpha"], "funnel.alpha");
    if (j.contains("beta")) f.beta = want_number(j["beta"], "funnel.beta");
    if (j.contains("v_hat")) f.v_hat = want_number(j["v_hat"], "funnel.v_hat");
    if (j.contains("t_shaping")) f.t_shaping = want_number(j["t_shaping"], "funnel.t_shaping");
}

void parse_reference(const json& j, ReferenceSpec& r) {
    if (j.is_number()) {
        r.signal = j.get<double>();
        return;
    }
    if (!j.is_object()) throw ConfigError("reference", "expected a number or a {t, y} table");
    reject_unknown(j, "reference", {"t", "y"});
    ReferenceSpec::Table tab;
    if (!j.contains("t") || !j.contains("y"))
        throw ConfigError("reference", "table needs both t and y arrays");
    tab.t = want_array(j["t"], "reference.t");
    tab.y = want_array(j["y"], "reference.y");
    r.signal = tab;
}

void parse_grid(const json& j, GridSpec& g) {
    reject_unknown(j, "grid", {"dxi", "n_points"});
    if (j.contains("dxi")) g.dxi = want_number(j["dxi"], "grid.dxi");
    if (j.contains("n_points")) g.n_points = want_int(j["n_points"], "grid.n_points");
}

void parse_time(const json& j, TimeSpec& t) {
    reject_unknown(j, "time",
                   {"t_end", "dt", "cfl_fraction", "n_output_rows", "integrator", "rtol", "atol"});
    if (j.contains("t_end")) t.t_end = want_number(j["t_end"], "time.t_end");
    if (j.contains("dt")) t.dt = want_number(j["dt"], "time.dt");
    if (j.contains("cfl_fraction")) t.cfl_fraction = want_number(j["cfl_fraction"], "time.cfl_fraction");
    if (j.contains("n_output_rows")) t.n_output_rows = want_int(j["n_output_rows"], "time.n_output_rows");
    if (j.contains("integrator")) {
        if (!j["integrator"].is_string()) throw ConfigError("time.integrator", "expected a string");
        t.integrator = integrator_from(j["integrator"].get<std::string>());
    }
    if (j.contains("rtol")) t.rtol = want_number(j["rtol"], "time.rtol");
    if (j.contains("atol")) t.atol = want_number(j["atol"], "time.atol");
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    const bool blank = std::all_of(text.begin(), text.end(),
                                   [](unsigned char ch) { return std::isspace(ch); });
    ExperimentConfig cfg = preset("l1");  // the default experiment table
    if (blank) return cfg;

    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw ConfigError("json", std::string("parse failure: ") + ex.what());
    }
    if (!j.is_object()) throw ConfigError("json", "top level must be an object");
    reject_unknown(j, "", {"name", "params", "damping", "funnel", "reference", "grid", "time",
                           "engine", "e_mode", "i_sign", "seed", "cfl_max"});

    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ConfigError("name", "expected a string");
        cfg.name = j["name"].get<std::string>();
    }
    if (j.contains("params")) parse_params(j["params"], cfg.params);
    cfg.damping.ell = cfg.params.ell;  // keep the damping domain in sync
    if (j.contains("damping")) parse_damping(j["damping"], cfg.damping);
    if (j.contains("funnel")) parse_funnel(j["funnel"], cfg.funnel);
    if (j.contains("reference")) parse_reference(j["reference"], cfg.reference);
    if (j.contains("grid")) {
        cfg.grid = GridSpec{};  // the document's grid replaces the default wholesale
        parse_grid(j["grid"], cfg.grid);
    }
    if (j.contains("time")) parse_time(j["time"], cfg.time);
    if (j.contains("engine")) {
        if (!j["engine"].is_string()) throw ConfigError("engine", "expected a string");
        cfg.engine = engine_from(j["engine"].get<std::string>());
    }
    if (j.contains("e_mode")) {
        if (!j["e_mode"].is_string()) throw ConfigError("e_mode", "expected a string");
        cfg.e_mode = e_mode_from(j["e_mode"].get<std::string>());
    }
    if (j.contains("i_sign")) cfg.i_sign = want_int(j["i_sign"], "i_sign");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("seed", "expected an integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("cfl_max")) cfg.cfl_max = want_number(j["cfl_max"], "cfl_max");
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("file", "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["params"] = {{"ell", cfg.params.ell}, {"rho", cfg.params.rho}, {"G", cfg.params.G},
                   {"J", cfg.params.J},     {"Gamma", cfg.params.Gamma}};

    json dist;
    if (auto* a = std::get_if<ArctanScale>(&cfg.damping.distributed)) {
        dist = {{"type", "arctan"}, {"gain", a->gain}};
    } else if (auto* t = std::get_if<DampingTable>(&cfg.damping.distributed)) {
        dist = {{"type", "table"}, {"velocity", t->velocity}, {"torque", t->torque}};
    } else {
        dist = {{"type", "none"}};
    }
    json bdry;
    if (auto* rc = std::get_if<RegularizedCoulomb>(&cfg.damping.boundary)) {
        bdry = {{"type", "coulomb"},
                {"amplitude", rc->amplitude},
                {"eps", rc->eps},
                {"bump", rc->bump},
                {"decay", rc->decay}};
    } else {
        bdry = {{"type", "none"}};
    }
    j["damping"] = {{"distributed", dist}, {"boundary", bdry}};

    j["funnel"] = {{"a", cfg.funnel.psi.a},   {"b", cfg.funnel.psi.b},
                   {"d", cfg.funnel.psi.d},   {"k", cfg.funnel.k},
                   {"alpha", cfg.funnel.alpha}, {"beta", cfg.funnel.beta},
                   {"v_hat", cfg.funnel.v_hat}, {"t_shaping", cfg.funnel.t_shaping}};

    if (auto* c = std::get_if<double>(&cfg.reference.signal)) {
        j["reference"] = *c;
    } else {
        const auto& tab = std::get<ReferenceSpec::Table>(cfg.reference.signal);
        j["reference"] = {{"t", tab.t}, {"y", tab.y}};
    }

    json grid = json::object();
    if (cfg.grid.dxi) grid["dxi"] = *cfg.grid.dxi;
    if (cfg.grid.n_points) grid["n_points"] = *cfg.grid.n_points;
    j["grid"] = grid;

    json time = {{"t_end", cfg.time.t_end},
                 {"cfl_fraction", cfg.time.cfl_fraction},
                 {"n_output_rows", cfg.time.n_output_rows},
                 {"integrator", integrator_name(cfg.time.integrator)},
                 {"rtol", cfg.time.rtol},
                 {"atol", cfg.time.atol}};
    if (cfg.time.dt) time["dt"] = *cfg.time.dt;
    j["time"] = time;

    j["engine"] = engine_name(cfg.engine);
    j["e_mode"] = e_mode_name(cfg.e_mode);
    j["i_sign"] = cfg.i_sign;
    j["seed"] = cfg.seed;
    j["cfl_max"] = cfg.cfl_max;
    return j.dump(2) + "\n";
}

} // namespace drillwave
