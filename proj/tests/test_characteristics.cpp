#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drillwave/characteristics.hpp"
#include "drillwave/config.hpp"
#include "drillwave/errors.hpp"
#include "drillwave/fdsolver.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace drillwave;

namespace {

const double kPi = 3.14159265358979323846;

DrillParams unit_params() { return DrillParams{}; }  // ell = rho = G = J = Gamma = 1

DampingSpec no_damping() { return DampingSpec{}; }

DampingSpec arctan_damping(double gain) {
    DampingSpec d;
    d.distributed = ArctanScale{gain};
    return d;
}

} // namespace

TEST_CASE("profile evaluation and derivatives") {
    const Profile poly = PolyProfile{{1.0, 2.0, 3.0}};
    CHECK(profile_eval(poly, 2.0) == doctest::Approx(17.0));        // 1 + 4 + 12
    CHECK(profile_derivative(poly, 2.0) == doctest::Approx(14.0));  // 2 + 12

    const Profile sine = SineProfile{2.0, 1, 1.0};
    CHECK(profile_eval(sine, 0.5) == doctest::Approx(2.0));
    CHECK(profile_derivative(sine, 0.0) == doctest::Approx(2.0 * kPi));
    CHECK(profile_derivative(sine, 0.5) == doctest::Approx(0.0).scale(1.0));

    const Profile zero = ZeroProfile{};
    CHECK(profile_eval(zero, 0.3) == 0.0);
    CHECK(profile_derivative(zero, 0.3) == 0.0);
}

TEST_CASE("homogeneous d'Alembert reproduces the separated sine solution") {
    InitialData data;
    data.phi0 = SineProfile{1.0, 1, 1.0};
    data.v0 = ZeroProfile{};
    data.policy = ExtensionPolicy::SmoothExtension;
    const double c = 1.0;
    for (double xi : {0.1, 0.35, 0.5, 0.8})
        for (double t : {0.0, 0.2, 0.7, 1.3}) {
            const double exact = std::sin(kPi * xi) * std::cos(kPi * c * t);
            CHECK(dalembert(data, nullptr, xi, t, c) == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
        }
}

TEST_CASE("velocity initial data enters through the averaged integral") {
    InitialData data;
    data.phi0 = ZeroProfile{};
    data.v0 = SineProfile{1.0, 1, 1.0};
    data.policy = ExtensionPolicy::SmoothExtension;
    const double c = 1.0;
    // phi = sin(pi xi) sin(pi c t) / (pi c)
    for (double xi : {0.25, 0.5, 0.6})
        for (double t : {0.1, 0.4, 0.9}) {
            const double exact = std::sin(kPi * xi) * std::sin(kPi * c * t) / (kPi * c);
            CHECK(dalembert(data, nullptr, xi, t, c) == doctest::Approx(exact).epsilon(1e-9).scale(1.0));
        }
}

TEST_CASE("dalembert_velocity matches a time difference of dalembert") {
    InitialData data;
    data.phi0 = PolyProfile{{0.0, 0.5, -0.25}};
    data.v0 = SineProfile{1.0, 1, 1.0};
    data.policy = ExtensionPolicy::SmoothExtension;
    const double c = 1.0, h = 1e-4;
    for (double xi : {0.3, 0.55})
        for (double t : {0.15, 0.6}) {
            const double fd =
                (dalembert(data, nullptr, xi, t + h, c) - dalembert(data, nullptr, xi, t - h, c)) /
                (2.0 * h);
            CHECK(dalembert_velocity(data, nullptr, xi, t, c) ==
                  doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
}

TEST_CASE("interior-only policy rejects points outside the domain of dependence") {
    InitialData data;
    data.phi0 = SineProfile{1.0, 1, 1.0};
    data.v0 = ZeroProfile{};
    data.policy = ExtensionPolicy::InteriorOnly;
    CHECK_NOTHROW(dalembert(data, nullptr, 0.5, 0.3, 1.0));
    CHECK_THROWS_AS(dalembert(data, nullptr, 0.1, 0.5, 1.0), ConfigError);
    CHECK_THROWS_AS(dalembert_velocity(data, nullptr, 0.9, 0.2, 1.0), ConfigError);
}

TEST_CASE("constant forcing integrates to the parabolic ramp") {
    InitialData data;  // zero data, interior cone
    const std::function<double(double, double)> one = [](double, double) { return 1.0; };
    // phi = t^2/2, phi_t = t inside the cone
    CHECK(dalembert(data, &one, 0.5, 0.4, 1.0) == doctest::Approx(0.08).epsilon(1e-8));
    CHECK(dalembert_velocity(data, &one, 0.5, 0.4, 1.0) == doctest::Approx(0.4).epsilon(1e-8));
}

TEST_CASE("undamped picard collapses to the d'Alembert velocity") {
    InitialData data;
    data.phi0 = SineProfile{1.0, 1, 1.0};
    data.v0 = ZeroProfile{};
    const PicardResult out =
        picard_damped(data, no_damping(), unit_params(), /*n_points=*/41, /*horizon=*/0.25);
    CHECK(out.iterations == 0);

    InitialData smooth = data;
    smooth.policy = ExtensionPolicy::SmoothExtension;
    const auto& f = out.field;
    for (int j = 0; j < f.n_levels; ++j)
        for (int i = 0; i < f.grid.n; ++i) {
            if (!f.valid(i, j)) continue;
            const double exact =
                dalembert_velocity(smooth, nullptr, f.grid.node(i), j * f.dt, 1.0);
            CHECK(f.vt[j][i] == doctest::Approx(exact).epsilon(1e-14).scale(1.0));
        }
}

TEST_CASE("picard horizon must fit the triangle") {
    InitialData data;
    data.phi0 = SineProfile{1.0, 1, 1.0};
    CHECK_THROWS_AS(picard_damped(data, no_damping(), unit_params(), 11, 0.8), ConfigError);
}

TEST_CASE("picard sweeps contract at the Lipschitz rate") {
    InitialData data;
    data.phi0 = SineProfile{2.0, 1, 1.0};
    data.v0 = ZeroProfile{};
    const double gain = 0.3, horizon = 0.25;
    const PicardResult out =
        picard_damped(data, arctan_damping(gain), unit_params(), 41, horizon, 1e-12);
    CHECK(out.iterations >= 2);
    REQUIRE(out.sup_deltas.size() >= 2);
    // the Duhamel map is a contraction with factor <= sup|F_d'| * horizon
    const double rate = gain * horizon * 1.1;
    for (std::size_t k = 1; k < out.sup_deltas.size(); ++k) {
        if (out.sup_deltas[k - 1] <= 1e-13) break;  // at the floating noise floor
        CHECK(out.sup_deltas[k] <= rate * out.sup_deltas[k - 1]);
    }
}

TEST_CASE("picard field agrees with the finite-difference solver inside the cone") {
    InitialData data;
    data.phi0 = SineProfile{1.0, 1, 1.0};
    data.v0 = ZeroProfile{};
    const DrillParams p = unit_params();
    const DampingSpec damping = arctan_damping(0.3);

    const PicardResult pic = picard_damped(data, damping, p, 41, 0.3, 1e-11);
    const OpenLoopResult fd = run_open_loop(
        p, damping, [](double xi) { return std::sin(kPi * xi); }, [](double) { return 0.0; },
        /*t_end=*/0.35, /*dxi=*/0.0125, /*dt=*/0.005);

    const auto& f = pic.field;
    double worst = 0.0;
    int compared = 0;
    for (int j = 1; j < f.n_levels; ++j)
        for (int i = 0; i < f.grid.n; ++i) {
            if (!f.valid(i, j)) continue;
            // Stay well inside the cone: the semidiscrete FD scheme leaks a
            // little boundary influence past the continuum front, so nodes
            // whose characteristic feet graze xi = 0 or xi = ell disagree.
            if (std::min(i, f.grid.n - 1 - i) - j < 8) continue;
            const double gap = std::abs(f.vt[j][i] - fd.fields.value(f.grid.node(i), j * f.dt));
            worst = std::max(worst, gap);
            ++compared;
        }
    CHECK(compared > 100);
    CHECK(worst <= 5e-3);
}

TEST_CASE("damping line integral") {
    const DrillParams p = unit_params();  // omega = 1
    const auto const_field = [](double, double) { return 2.0; };
    // no law: identically zero
    CHECK(damping_line_integral(const_field, 1.5, p, no_damping()) == 0.0);
    // constant velocity: omega * gain * atan(v)
    const double expect = 1.0 * 0.3 * std::atan(2.0);
    CHECK(damping_line_integral(const_field, 1.5, p, arctan_damping(0.3)) ==
          doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("retarded bit equation right side") {
    const DrillParams p = unit_params();
    // J y' = -(G Gamma / c)(y + (c/G) u_del - z_del + D_phi) + F_e(y), frictionless bit
    CHECK(y_delay_rhs(2.0, 0.5, 0.25, 0.1, p, no_damping()) == doctest::Approx(-2.35));
}

TEST_CASE("retarded bit equation: pure decay against the closed form") {
    const DrillParams p = unit_params();
    const auto zero1 = [](double) { return 0.0; };
    const auto zero2 = [](double, double) { return 0.0; };
    const double y0 = 2.0, t_end = 3.0, dt = 0.01;
    const DelayOdeResult out = integrate_delay_ode(zero1, zero1, zero2, y0, t_end, dt, p, no_damping());
    REQUIRE(!out.t.empty());
    CHECK(out.t.front() == doctest::Approx(1.0));
    CHECK(out.t.back() == doctest::Approx(t_end));
    // J y' = -(G Gamma / c) y: exponential decay from the handoff time
    for (std::size_t k = 0; k < out.t.size(); k += 37) {
        const double exact = y0 * std::exp(-(out.t[k] - 1.0));
        CHECK(out.y[k] == doctest::Approx(exact).epsilon(1e-8));
    }
    CHECK_THROWS_AS(integrate_delay_ode(zero1, zero1, zero2, y0, /*t_end=*/0.5, dt, p, no_damping()),
                    ConfigError);
}

TEST_CASE("exact-transport loop: both error modes agree to solver precision") {
    ExperimentConfig cfg = preset("l1");
    cfg.damping.distributed = std::monostate{};  // the transport identity is undamped
    cfg.time.t_end = 3.0;
    // gain condition c k / 2 > sup psi over [-omega, inf)
    cfg.funnel.k = 4.0 * (8.0 * std::exp(1.0) + 0.1);

    const TransportLoopResult out = run_transport_closed_loop(cfg, /*dt=*/1e-3);
    REQUIRE(out.t.size() == out.y.size());
    REQUIRE(out.t.size() == out.e_direct.size());
    CHECK(out.t.front() == doctest::Approx(0.0));
    CHECK(out.t.back() == doctest::Approx(3.0));
    for (double e : out.e_direct) CHECK(std::abs(e) < 1.0);
    CHECK(out.max_mode_gap <= 1e-8);
    // the loop actually pulls the bit towards the reference
    CHECK(std::abs(out.y.back() - 5.0) < std::abs(out.y.front() - 5.0));
}

TEST_CASE("exact-transport loop refuses distributed damping") {
    ExperimentConfig cfg = preset("l1");  // arctan law present
    cfg.funnel.k = 4.0 * (8.0 * std::exp(1.0) + 0.1);
    CHECK_THROWS_AS(run_transport_closed_loop(cfg, 1e-3), ConfigError);
}
