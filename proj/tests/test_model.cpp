#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mfgpow/model.hpp"

using namespace mfgpow;

TEST_CASE("baseline calibration validates") {
    ModelParams p;  // defaults are the baseline calibration
    REQUIRE_NOTHROW(validate_params(p));
    REQUIRE(p.r == 0.05);
    REQUIRE(p.delta == 0.2);
    REQUIRE(p.lambda == 1.0);
    REQUIRE(p.c == 0.02);
    REQUIRE(p.eps == 0.0);
}

TEST_CASE("validation rejects each violated field by name") {
    auto expect_reject = [](ModelParams p, const std::string& field) {
        try {
            validate_params(p);
            FAIL("expected rejection for " << field);
        } catch (const ConfigError& e) {
            REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring(field));
        }
    };
    {
        ModelParams p; p.r = 0.0;
        expect_reject(p, "r");
    }
    {
        ModelParams p; p.delta = -0.1;
        expect_reject(p, "delta");
    }
    {
        ModelParams p; p.lambda = 0.0;
        expect_reject(p, "lambda");
    }
    {
        ModelParams p; p.c = -1.0;
        expect_reject(p, "c");
    }
    {
        ModelParams p; p.eps = -1e-9;
        expect_reject(p, "eps");
    }
    {
        ModelParams p; p.eps = 50.0;  // c*eps = 1 exactly
        expect_reject(p, "eps");
    }
    {
        ModelParams p; p.lambda = std::numeric_limits<double>::infinity();
        expect_reject(p, "lambda");
    }
}

TEST_CASE("grid nodes are uniform from 0 to k_max") {
    Grid1D g{150.0, 4000};
    REQUIRE_NOTHROW(validate_grid(g));
    REQUIRE(g.node(0) == 0.0);
    REQUIRE(g.node(g.n - 1) == Catch::Approx(150.0));
    const double h = g.spacing();
    for (std::size_t i : {std::size_t(1), std::size_t(17), std::size_t(3999)}) {
        REQUIRE(g.node(i) == Catch::Approx(static_cast<double>(i) * h));
    }
    REQUIRE_THROWS_AS(validate_grid(Grid1D{0.0, 100}), ConfigError);
    REQUIRE_THROWS_AS(validate_grid(Grid1D{10.0, 2}), ConfigError);
}

TEST_CASE("piecewise-linear evaluation reproduces linear data exactly") {
    Grid1D g{10.0, 21};
    ValueFunction1D u{g, {}};
    u.values.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i) u.values[i] = 3.0 - 0.25 * g.node(i);

    std::mt19937 rng(42);
    std::uniform_real_distribution<double> draw(0.0, 10.0);
    for (int it = 0; it < 1000; ++it) {
        const double k = draw(rng);
        REQUIRE(u(k) == Catch::Approx(3.0 - 0.25 * k).margin(1e-13));
    }
    // Clamped outside the domain.
    REQUIRE(u(-1.0) == u.values.front());
    REQUIRE(u(11.0) == u.values.back());
}

TEST_CASE("real hashrate transform inverts exponential growth exactly") {
    const double delta = 0.2;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> tdraw(0.0, 40.0);
    std::uniform_real_distribution<double> vdraw(0.1, 1e6);
    for (int it = 0; it < 10000; ++it) {
        const double t0 = tdraw(rng);
        const double t = t0 + tdraw(rng);
        const double real = vdraw(rng);
        const double nominal = real * std::exp(delta * (t - t0));
        REQUIRE(real_hashrate(nominal, t, t0, delta) ==
                Catch::Approx(real).epsilon(1e-12));
    }
    // Identity at t = t0.
    REQUIRE(real_hashrate(123.0, 5.0, 5.0, delta) == 123.0);
}

TEST_CASE("trajectory validation") {
    Trajectory t;
    t.times = {0.0, 0.5, 1.0};
    t.values = {1.0, 2.0, 3.0};
    REQUIRE_NOTHROW(validate_trajectory(t));

    // Duplicated stamp encodes an instantaneous jump and is admitted.
    Trajectory jump;
    jump.times = {0.0, 0.0, 1.0};
    jump.values = {10.0, 50.0, 50.0};
    REQUIRE_NOTHROW(validate_trajectory(jump));

    Trajectory bad;
    bad.times = {0.0, 1.0, 0.5};
    bad.values = {1.0, 2.0, 3.0};
    REQUIRE_THROWS_AS(validate_trajectory(bad), ConfigError);

    Trajectory mismatched;
    mismatched.times = {0.0, 1.0};
    mismatched.values = {1.0};
    REQUIRE_THROWS_AS(validate_trajectory(mismatched), ConfigError);
}

TEST_CASE("non_increasing helper") {
    REQUIRE(non_increasing({3.0, 2.0, 2.0, -1.0}));
    REQUIRE_FALSE(non_increasing({3.0, 2.0, 2.5}));
    REQUIRE(non_increasing({3.0, 2.0, 2.0 + 1e-13}, 1e-12));
}
