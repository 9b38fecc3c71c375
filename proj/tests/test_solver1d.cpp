#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mfgpow/solver1d.hpp"

using namespace mfgpow;

namespace {

// Independent oracle for the stationary state: bisection on the fixed-point
// condition delta*K = lambda*(1/(K+eps) - c)/(r+delta), whose left side is
// increasing and right side decreasing in K.
double stationary_bisection_oracle(const ModelParams& p) {
    auto gap = [&](double k) {
        return p.lambda * (1.0 / (k + p.eps) - p.c) / (p.r + p.delta) -
               p.delta * k;
    };
    double lo = 0.0, hi = 1.0;
    while (gap(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ModelParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    ModelParams p;
    p.r = 0.01 + 0.4 * u01(rng);
    p.delta = 0.05 + 1.2 * u01(rng);
    p.lambda = std::exp(std::log(0.05) + u01(rng) * (std::log(20.0) - std::log(0.05)));
    p.c = std::exp(std::log(0.002) + u01(rng) * (std::log(0.2) - std::log(0.002)));
    p.eps = (u01(rng) < 0.5) ? 0.0 : 0.45 / p.c * u01(rng);
    return p;
}

// Draws restricted so the zero-profit scale 1/c - eps stays within a modest
// multiple of K*; otherwise a uniform grid at fixed n cannot resolve the
// drift root (the domain must still cover 1/c - eps).
ModelParams random_params_resolvable(std::mt19937_64& rng) {
    ModelParams p;
    do {
        p = random_params(rng);
    } while (1.0 / p.c - p.eps > 12.0 * stationary_state_closed_form(p));
    return p;
}

}  // namespace

TEST_CASE("closed-form stationary state matches the bisection oracle") {
    std::mt19937_64 rng(20260814);
    for (int it = 0; it < 200; ++it) {
        const ModelParams p = random_params(rng);
        const double k_closed = stationary_state_closed_form(p);
        const double k_oracle = stationary_bisection_oracle(p);
        REQUIRE(k_closed == Catch::Approx(k_oracle).epsilon(1e-10).margin(1e-12));
    }
}

TEST_CASE("stationary report reproduces the frozen baseline values") {
    const EquilibriumReport rep = stationary_report(ModelParams{});
    // High-precision references for the baseline calibration.
    REQUIRE(rep.k_star == Catch::Approx(4.27660585711988).epsilon(1e-13));
    REQUIRE(rep.u_star == Catch::Approx(0.855321171423976).epsilon(1e-13));
    REQUIRE(rep.pi_star == Catch::Approx(3.65787153143041).epsilon(1e-13));
    // Loose anchors as commonly quoted.
    REQUIRE(std::abs(rep.k_star - 4.2766) < 1e-3);
    REQUIRE(std::abs(rep.u_star - 0.85532) < 1e-3);
    REQUIRE(std::abs(rep.pi_star - 3.6578) < 1e-3);
    REQUIRE(rep.iterations == 0);
    REQUIRE(rep.residual_norm < 1e-12);
}

TEST_CASE("closed form is stable at extreme lambda and degenerate c*eps") {
    ModelParams p;
    p.lambda = 1e6;
    REQUIRE(stationary_state_closed_form(p) ==
            Catch::Approx(49.9937515620119).epsilon(1e-12));

    // c*eps = 1 collapses the stationary state to zero.
    ModelParams degenerate;
    degenerate.eps = 50.0;  // c = 0.02
    REQUIRE(stationary_state_closed_form(degenerate) == 0.0);
}

TEST_CASE("stationary report identities hold to round-off") {
    std::mt19937_64 rng(99);
    for (int it = 0; it < 100; ++it) {
        const ModelParams p = random_params(rng);
        const EquilibriumReport rep = stationary_report(p);
        REQUIRE(rep.u_star == Catch::Approx(p.delta * rep.k_star / p.lambda).epsilon(1e-14));
        REQUIRE(rep.pi_star ==
                Catch::Approx(p.delta * rep.k_star * rep.k_star / p.lambda).epsilon(1e-14));
        // Flow form of the stationary unit value agrees with delta*K*/lambda.
        const double flow_value =
            (1.0 / (rep.k_star + p.eps) - p.c) / (p.r + p.delta);
        REQUIRE(rep.u_star == Catch::Approx(flow_value).epsilon(1e-10));
    }
}

TEST_CASE("baseline solve satisfies shape, residual, and root accuracy") {
    const ModelParams p;
    const Grid1D g{150.0, 4000};
    SolveStats stats;
    const ValueFunction1D u = solve_master_1d(p, g, {}, &stats);

    REQUIRE(stats.residual <= 1e-8);
    REQUIRE(sup_norm(master_residual_1d(p, u)) <= 1e-8);

    REQUIRE(u.values.front() >= 0.0);
    REQUIRE(non_increasing(u.values));

    const double k_root = stationary_state_numerical(p, u);
    const double k_exact = stationary_state_closed_form(p);
    REQUIRE(std::abs(k_root - k_exact) / k_exact < 1e-4);
}

TEST_CASE("unit value changes sign exactly once, well beyond 1/c") {
    // A unit bought at large K still profits later because capacity decays
    // into the profitable region, so U stays positive past 1/c = 50; the far
    // field behaves like 1/(rK) - c/(r+delta) plus a decaying mode, putting
    // the single crossing near 157 for the baseline.
    const ModelParams p;
    const ValueFunction1D u = solve_master_1d(p, Grid1D{400.0, 8000});
    int crossings = 0;
    double k_cross = -1.0;
    for (std::size_t i = 0; i + 1 < u.grid.n; ++i) {
        if (u.values[i] >= 0.0 && u.values[i + 1] < 0.0) {
            ++crossings;
            k_cross = u.grid.node(i);
        }
    }
    REQUIRE(crossings == 1);
    REQUIRE(k_cross > 100.0);
    REQUIRE(k_cross < 250.0);
    REQUIRE(u.values.front() >= 0.0);
    REQUIRE(u.values.back() < 0.0);
}

TEST_CASE("pde solutions track the closed form across random parameters") {
    std::mt19937_64 rng(4242);
    for (int it = 0; it < 8; ++it) {
        const ModelParams p = random_params_resolvable(rng);
        const double k_exact = stationary_state_closed_form(p);
        const double k_max =
            std::max({1.2 * (1.0 / p.c - p.eps), 3.0 * k_exact, 1.0});
        const ValueFunction1D u = solve_master_1d(p, Grid1D{k_max, 4000});
        const double k_root = stationary_state_numerical(p, u);
        CAPTURE(p.r, p.delta, p.lambda, p.c, p.eps, k_exact, k_root);
        REQUIRE(std::abs(k_root - k_exact) / k_exact < 1e-4);
    }
}

TEST_CASE("discrete derivative respects the a priori bound when eps > 0") {
    ModelParams p;
    p.eps = 0.1;
    const Grid1D g = default_grid(p, 2001);
    const ValueFunction1D u = solve_master_1d(p, g);
    const double bound = -2.0 / (p.eps * p.eps * p.delta);
    const double h = g.spacing();
    for (std::size_t i = 0; i + 1 < g.n; ++i) {
        const double slope = (u.values[i + 1] - u.values[i]) / h;
        REQUIRE(slope <= 1e-9);
        REQUIRE(slope >= bound);
    }
}

TEST_CASE("monotone coupling of the drift field") {
    const ModelParams p;
    const ValueFunction1D u = solve_master_1d(p, Grid1D{150.0, 2001});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> draw(0.0, 150.0);
    for (int it = 0; it < 10000; ++it) {
        const double x = draw(rng), y = draw(rng);
        const double w = (x - y) * (capacity_drift(p, u, x) - capacity_drift(p, u, y));
        REQUIRE(w <= 1e-12);
    }
}

TEST_CASE("grid refinement contracts the solution change by >= 1.8") {
    ModelParams p;
    p.eps = 2.0;  // regularisation resolved on every grid level
    const double k_max = 60.0;
    const ValueFunction1D u1 = solve_master_1d(p, Grid1D{k_max, 501});
    const ValueFunction1D u2 = solve_master_1d(p, Grid1D{k_max, 1001});
    const ValueFunction1D u4 = solve_master_1d(p, Grid1D{k_max, 2001});

    // Nested nodes: coarse node i sits at fine node 2i.
    auto dist = [](const ValueFunction1D& coarse, const ValueFunction1D& fine) {
        double m = 0.0;
        for (std::size_t i = 0; i < coarse.grid.n; ++i) {
            m = std::max(m, std::abs(coarse.values[i] - fine.values[2 * i]));
        }
        return m;
    };
    const double d1 = dist(u1, u2);
    const double d2 = dist(u2, u4);
    CAPTURE(d1, d2);
    REQUIRE(d1 / d2 >= 1.8);
}

TEST_CASE("trajectory stays at the numerical stationary point") {
    const ModelParams p;
    const ValueFunction1D u = solve_master_1d(p, Grid1D{150.0, 4000});
    const double k_star = stationary_state_numerical(p, u);
    const Trajectory traj = simulate_trajectory(p, u, k_star, 50.0);
    for (double k : traj.values) {
        REQUIRE(std::abs(k - k_star) <= 1e-6);
    }
}

TEST_CASE("trajectory from 2K* decreases monotonically to K*") {
    const ModelParams p;
    const ValueFunction1D u = solve_master_1d(p, Grid1D{150.0, 4000});
    const double k_exact = stationary_state_closed_form(p);
    const Trajectory traj = simulate_trajectory(p, u, 2.0 * k_exact, 250.0);
    REQUIRE(non_increasing(traj.values));
    REQUIRE(std::abs(traj.values.back() - k_exact) <= 1e-3);
}

TEST_CASE("trajectory from 0 enters the domain and converges") {
    const ModelParams p;
    const ValueFunction1D u = solve_master_1d(p, Grid1D{150.0, 4000});
    const double k_exact = stationary_state_closed_form(p);
    const Trajectory traj = simulate_trajectory(p, u, 0.0, 250.0);
    REQUIRE(traj.values.front() == 0.0);
    REQUIRE(std::abs(traj.values.back() - k_exact) <= 1e-3);
    // Times strictly increase for ODE paths.
    for (std::size_t i = 0; i + 1 < traj.times.size(); ++i) {
        REQUIRE(traj.times[i + 1] > traj.times[i]);
    }
}

TEST_CASE("value oracle confirms the solved unit value") {
    const ModelParams p;
    const ValueFunction1D u = solve_master_1d(p, Grid1D{51.0, 20000});
    const double k_star = stationary_state_closed_form(p);
    for (double k0 : {1.0, k_star, 10.0}) {
        const double oracle = value_oracle(p, u, k0, 100.0, 2e-4);
        CAPTURE(k0, oracle, u(k0));
        REQUIRE(std::abs(u(k0) - oracle) <= 1e-3);
    }
}

TEST_CASE("solver rejects bad domains and seeds") {
    const ModelParams p;
    REQUIRE_THROWS_AS(solve_master_1d(p, Grid1D{40.0, 500}), ConfigError);

    const ValueFunction1D u = solve_master_1d(p, Grid1D{150.0, 500});
    REQUIRE_THROWS_AS(simulate_trajectory(p, u, -1.0, 10.0), ConfigError);
    REQUIRE_THROWS_AS(simulate_trajectory(p, u, 151.0, 10.0), ConfigError);
    REQUIRE_THROWS_AS(simulate_trajectory(p, u, 1.0, 0.0), ConfigError);
    REQUIRE_THROWS_AS(value_oracle(p, u, 0.0), ConfigError);  // eps = 0
}

TEST_CASE("solver options are validated") {
    const ModelParams p;
    const Grid1D g{150.0, 100};
    SolverOptions bad;
    bad.tol = 0.0;
    REQUIRE_THROWS_AS(solve_master_1d(p, g, bad), ConfigError);
    bad = SolverOptions{};
    bad.cfl = 1.5;
    REQUIRE_THROWS_AS(solve_master_1d(p, g, bad), ConfigError);
    bad = SolverOptions{};
    bad.max_iters = 0;
    REQUIRE_THROWS_AS(solve_master_1d(p, g, bad), ConfigError);
}
