#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drillwave/delay.hpp"
#include "drillwave/errors.hpp"

#include <cmath>
#include <random>

using namespace drillwave;

TEST_CASE("exact at sample times, linear in between") {
    HistoryBuffer h(10.0);
    h.push(0.0, 1.0);
    h.push(1.0, 3.0);
    h.push(2.5, 0.0);

    CHECK(h.sample(0.0) == 1.0);
    CHECK(h.sample(1.0) == 3.0);
    CHECK(h.sample(2.5) == 0.0);
    CHECK(h.sample(0.5) == doctest::Approx(2.0));
    CHECK(h.sample(1.75) == doctest::Approx(1.5));
}

TEST_CASE("affine signals are reproduced exactly") {
    HistoryBuffer h(100.0);
    auto f = [](double t) { return 3.5 * t - 2.0; };
    for (int i = 0; i <= 40; ++i) h.push(0.1 * i, f(0.1 * i));
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> ts(0.0, 4.0);
    for (int i = 0; i < 300; ++i) {
        const double t = ts(gen);
        CHECK(h.sample(t) == doctest::Approx(f(t)).epsilon(1e-13));
    }
}

TEST_CASE("interpolation error bound dt^2/8 * sup|f''| on a sine") {
    const double dt = 0.05;
    HistoryBuffer h(100.0);
    for (int i = 0; i <= 200; ++i) h.push(dt * i, std::sin(dt * i));
    const double bound = dt * dt / 8.0;  // |f''| <= 1
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> ts(0.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = ts(gen);
        CHECK(std::abs(h.sample(t) - std::sin(t)) <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("push must advance time") {
    HistoryBuffer h(5.0);
    h.push(0.0, 0.0);
    h.push(1.0, 0.0);
    CHECK_THROWS_AS(h.push(1.0, 0.0), DelayBufferError);
    CHECK_THROWS_AS(h.push(0.5, 0.0), DelayBufferError);
}

TEST_CASE("lookups outside the span refuse to extrapolate") {
    HistoryBuffer h(5.0);
    h.push(0.0, 1.0);
    h.push(2.0, 2.0);
    CHECK_THROWS_AS(h.sample(-0.001), DelayBufferError);
    CHECK_THROWS_AS(h.sample(2.001), DelayBufferError);
    CHECK_THROWS_AS(HistoryBuffer(1.0).sample(0.0), DelayBufferError);
}

TEST_CASE("eviction keeps the horizon fully interpolable") {
    const double horizon = 1.0;
    const double dt = 0.01;
    HistoryBuffer h(horizon);
    int pushed = 0;
    for (int i = 0; i <= 100000; ++i, ++pushed) h.push(dt * i, static_cast<double>(i));
    const double latest = dt * (pushed - 1);

    // the full horizon is still available...
    CHECK(h.sample(latest - horizon) == doctest::Approx((latest - horizon) / dt));
    CHECK(h.sample(latest) == doctest::Approx(static_cast<double>(pushed - 1)));
    // ...but almost everything older has been evicted
    CHECK(h.size() < 150);
    CHECK(h.oldest_time() <= latest - horizon);
    CHECK(h.oldest_time() >= latest - horizon - 2.0 * dt);
    CHECK_THROWS_AS(h.sample(0.0), DelayBufferError);
}

TEST_CASE("init_history hits both endpoints exactly") {
    auto f = [](double t) { return t * t; };
    HistoryBuffer h = init_history(f, -2.0, 0.0, 0.3, 10.0);  // span not divisible by dt
    CHECK(h.oldest_time() == -2.0);
    CHECK(h.latest_time() == 0.0);
    CHECK(h.sample(-2.0) == doctest::Approx(4.0));
    CHECK(h.sample(0.0) == doctest::Approx(0.0));
    // interior samples follow f up to interpolation error
    CHECK(h.sample(-1.0) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("constant prehistory stays constant") {
    HistoryBuffer h = init_history([](double) { return 7.0; }, -3.0, 0.0, 0.05, 10.0);
    for (double t = -3.0; t <= 0.0; t += 0.013) CHECK(h.sample(t) == doctest::Approx(7.0));
}
