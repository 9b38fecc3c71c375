#pragma once

// Deterministic single-population solver. The unit value U solves
//
//   0 = -(r+delta) U + (-delta K + lambda U) U' + 1/(K+eps) - c     on [0, inf)
//
// discretised with first-order upwind transport on [0, k_max]. The upwind
// direction at each node follows the sign of the current drift
// a(K) = -delta K + lambda U(K); ties (a == 0) take the right-sided
// difference. No boundary data is imposed: a(0) = lambda U(0) >= 0 and
// a(k_max) < 0 once k_max > 1/c - eps, so characteristics enter the domain
// at both ends. The reward at the K = 0 node is evaluated as 1/(h+eps) with
// h the grid spacing, which keeps eps = 0 admissible.
//
// The discrete steady state is reached by pseudo-time relaxation. Each
// iteration freezes the drift at the current iterate and takes one backward
// Euler step of size dtau (a strictly diagonally dominant tridiagonal solve),
// growing dtau while the residual decreases. The converged iterate satisfies
// the self-consistent upwind residual below to the requested tolerance; the
// explicit bound cfl*h/max|a| only seeds the initial step size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/tridiag.hpp"

namespace mfgpow {

struct SolverOptions {
    double tol = 1e-8;          // sup-norm residual target
    std::size_t max_iters = 20000;
    double cfl = 0.5;           // safety factor for the initial pseudo-time step
};

inline void validate_options(const SolverOptions& o) {
    if (!(o.tol > 0.0)) throw ConfigError("SolverOptions.tol must be > 0");
    if (o.max_iters == 0) throw ConfigError("SolverOptions.max_iters must be >= 1");
    if (!(o.cfl > 0.0) || o.cfl > 1.0) {
        throw ConfigError("SolverOptions.cfl must be in (0, 1]");
    }
}

struct SolveStats {
    double residual = 0.0;
    std::size_t iterations = 0;
};

// Stationary hashrate K*: positive root of
//   delta*(r+delta)*K^2 + (delta*eps*(r+delta) + c*lambda)*K - lambda*(1-c*eps) = 0,
// written in a cancellation-free form (valid up to lambda ~ 1/eta ~ 1e6 and
// beyond). Degenerate input c*eps = 1 gives K* = 0.
inline double stationary_state_closed_form(const ModelParams& p) {
    const double b = p.delta * p.eps + p.c * p.lambda / (p.r + p.delta);
    const double diff = p.delta * p.eps - p.c * p.lambda / (p.r + p.delta);
    const double disc = diff * diff + 4.0 * p.delta * p.lambda / (p.r + p.delta);
    const double num = 2.0 * (p.lambda / (p.r + p.delta)) * (1.0 - p.c * p.eps);
    return num / (std::sqrt(disc) + b);
}

// K*, U* = delta K*/lambda and the stationary industry value
// pi* = K* U* = delta K*^2 / lambda, all closed form (0 iterations).
inline EquilibriumReport stationary_report(const ModelParams& p) {
    validate_params(p);
    EquilibriumReport rep;
    rep.k_star = stationary_state_closed_form(p);
    rep.u_star = p.delta * rep.k_star / p.lambda;
    rep.pi_star = rep.k_star * rep.u_star;
    rep.residual_norm = std::abs(p.delta * rep.k_star - p.lambda * rep.u_star);
    rep.iterations = 0;
    return rep;
}

// Default domain truncation: generous multiple of both the zero-profit
// capacity 1/c and the stationary state.
inline double default_k_max(const ModelParams& p) {
    return std::max(3.0 / p.c, 3.0 * stationary_state_closed_form(p));
}

inline Grid1D default_grid(const ModelParams& p, std::size_t n = 2001) {
    return Grid1D{default_k_max(p), n};
}

namespace detail {

// Flow payoff at the nodes; the K = 0 node uses 1/(h+eps).
inline std::vector<double> flow_payoff(const ModelParams& p, const Grid1D& g) {
    const double h = g.spacing();
    std::vector<double> f(g.n);
    f[0] = 1.0 / (h + p.eps) - p.c;
    for (std::size_t i = 1; i < g.n; ++i) {
        f[i] = 1.0 / (g.node(i) + p.eps) - p.c;
    }
    return f;
}

// Upwind residual of the steady transport equation
//   R_i = -rho U_i + a_i D_i U + f_i
// with per-node one-sided differences chosen by sign(a_i) (ties right).
// A boundary node whose drift points outward contributes no transport term;
// solvers reject such solutions after convergence.
template <typename DriftFn>
std::vector<double> upwind_residual(const Grid1D& g, double rho,
                                    const std::vector<double>& f,
                                    const std::vector<double>& u,
                                    DriftFn&& drift_at) {
    const double h = g.spacing();
    const std::size_t n = g.n;
    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = drift_at(i, u[i]);
        double transport = 0.0;
        if (a >= 0.0) {
            if (i + 1 < n) transport = a * (u[i + 1] - u[i]) / h;
        } else {
            if (i > 0) transport = a * (u[i] - u[i - 1]) / h;
        }
        res[i] = -rho * u[i] + transport + f[i];
    }
    return res;
}

// Backward Euler pseudo-time relaxation with frozen-coefficient upwinding.
// Returns the converged values; throws SolverError on iteration exhaustion
// or an outward boundary drift at the solution.
template <typename DriftFn>
std::vector<double> relax_upwind_1d(const Grid1D& g, double rho,
                                    const std::vector<double>& f,
                                    std::vector<double> u,
                                    const SolverOptions& opt,
                                    DriftFn&& drift_at,
                                    SolveStats* stats) {
    const double h = g.spacing();
    const std::size_t n = g.n;

    std::vector<double> lower(n), diag(n), upper(n), rhs(n), scratch(n);

    double amax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        amax = std::max(amax, std::abs(drift_at(i, u[i])));
    }
    double dtau = opt.cfl * h / (amax + rho * h + 1e-300);
    double prev_res = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        const double idtau = 1.0 / dtau;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = drift_at(i, u[i]);
            double up = 0.0, lo = 0.0, courant = 0.0;
            if (a >= 0.0) {
                if (i + 1 < n) { courant = a / h; up = -courant; }
            } else {
                if (i > 0) { courant = -a / h; lo = -courant; }
            }
            lower[i] = lo;
            upper[i] = up;
            diag[i] = idtau + rho + courant;
            rhs[i] = f[i] + u[i] * idtau;
        }
        thomas_solve(lower, diag, upper, rhs, scratch);
        u.swap(rhs);

        const auto res = upwind_residual(g, rho, f, u, drift_at);
        const double rnorm = sup_norm(res);
        if (stats) {
            stats->residual = rnorm;
            stats->iterations = iter;
        }
        if (rnorm <= opt.tol) {
            const double scale = amax + rho + 1.0;
            if (drift_at(0, u[0]) < -1e-10 * scale ||
                drift_at(n - 1, u[n - 1]) > 1e-10 * scale) {
                throw SolverError(
                    "drift points outward at a boundary node; enlarge k_max");
            }
            return u;
        }
        if (rnorm < prev_res) {
            dtau = std::min(dtau * 2.0, 1e12);
        } else {
            dtau = std::max(dtau * 0.25, 1e-12);
        }
        prev_res = rnorm;
    }
    throw SolverError("solve_master_1d: no convergence within max_iters (residual " +
                      std::to_string(stats ? stats->residual : -1.0) + ")");
}

}  // namespace detail

// Residual of the discretised master equation at every node of `u`, drift
// evaluated self-consistently at `u` itself. Tests recompute this to confirm
// solver postconditions.
inline std::vector<double> master_residual_1d(const ModelParams& p,
                                              const ValueFunction1D& u) {
    const auto f = detail::flow_payoff(p, u.grid);
    return detail::upwind_residual(
        u.grid, p.r + p.delta, f, u.values,
        [&](std::size_t i, double ui) {
            return -p.delta * u.grid.node(i) + p.lambda * ui;
        });
}

// Solves the master equation on `g`. Initial iterate is the zero-drift value
// f/(r+delta). Requires k_max > 1/c - eps so the far field is unprofitable.
inline ValueFunction1D solve_master_1d(const ModelParams& p, const Grid1D& g,
                                       const SolverOptions& opt = {},
                                       SolveStats* stats = nullptr) {
    validate_params(p);
    validate_grid(g);
    validate_options(opt);
    if (!(g.k_max > 1.0 / p.c - p.eps)) {
        throw ConfigError("Grid1D.k_max must exceed 1/c - eps");
    }

    const double rho = p.r + p.delta;
    const auto f = detail::flow_payoff(p, g);
    std::vector<double> u(g.n);
    for (std::size_t i = 0; i < g.n; ++i) u[i] = f[i] / rho;

    auto values = detail::relax_upwind_1d(
        g, rho, f, std::move(u), opt,
        [&](std::size_t i, double ui) {
            return -p.delta * g.node(i) + p.lambda * ui;
        },
        stats);
    return ValueFunction1D{g, std::move(values)};
}

// Capacity drift induced by a solved unit value, mu(K) = -delta K + lambda U(K).
inline double capacity_drift(const ModelParams& p, const ValueFunction1D& u, double k) {
    return -p.delta * k + p.lambda * u(k);
}

// Root of delta*K = lambda*U(K) on the piecewise-linear interpolant of a
// solved (non-increasing) unit value; exact within each bracketing cell.
inline double stationary_state_numerical(const ModelParams& p,
                                         const ValueFunction1D& u) {
    const Grid1D& g = u.grid;
    const double h = g.spacing();
    double phi_prev = p.lambda * u.values[0];  // drift at K = 0
    if (phi_prev <= 0.0) return 0.0;
    for (std::size_t i = 1; i < g.n; ++i) {
        const double phi = -p.delta * g.node(i) + p.lambda * u.values[i];
        if (phi <= 0.0) {
            // Linear segment: solve -delta*(K_{i-1}+s) + lambda*(U_{i-1}+s*dU/h) = 0.
            const double du = (u.values[i] - u.values[i - 1]) / h;
            const double s = phi_prev / (p.delta - p.lambda * du);
            return g.node(i - 1) + s;
        }
        phi_prev = phi;
    }
    throw SolverError("stationary_state_numerical: drift has no root on the grid");
}

// Explicit Euler path of dK = (-delta K + lambda U(K)) dt from k0, sampled at
// step dt (default 0.01/delta) plus a final partial step landing on horizon.
// K is clamped at 0; leaving [0, k_max] raises SolverError.
inline Trajectory simulate_trajectory(const ModelParams& p, const ValueFunction1D& u,
                                      double k0, double horizon, double dt = 0.0) {
    validate_params(p);
    if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    if (k0 < 0.0 || k0 > u.grid.k_max) {
        throw ConfigError("k0 must lie in [0, k_max]");
    }
    if (dt <= 0.0) dt = 0.01 / p.delta;

    Trajectory traj;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / dt));
    traj.times.reserve(steps + 1);
    traj.values.reserve(steps + 1);

    double t = 0.0, k = k0;
    traj.times.push_back(t);
    traj.values.push_back(k);
    while (t < horizon) {
        const double step = std::min(dt, horizon - t);
        k += step * capacity_drift(p, u, k);
        if (k < 0.0) k = 0.0;
        if (k > u.grid.k_max) {
            throw SolverError("simulate_trajectory: path exits [0, k_max]");
        }
        t += step;
        traj.times.push_back(t);
        traj.values.push_back(k);
    }
    return traj;
}

// Independent fixed-point check: discounted flow integral
//   integral_0^T exp(-(r+delta) t) (1/(K_t+eps) - c) dt
// along the Euler path from k0 (trapezoid rule). Horizon <= 0 selects T with
// exp(-(r+delta)T) <= 1e-10. Requires k0 + eps > 0.
inline double value_oracle(const ModelParams& p, const ValueFunction1D& u,
                           double k0, double horizon = 0.0, double dt = 1e-3) {
    if (k0 + p.eps <= 0.0) {
        throw ConfigError("value_oracle requires k0 + eps > 0");
    }
    const double rho = p.r + p.delta;
    if (horizon <= 0.0) horizon = std::log(1e10) / rho;
    const Trajectory traj = simulate_trajectory(p, u, k0, horizon, dt);

    auto integrand = [&](std::size_t i) {
        return std::exp(-rho * traj.times[i]) *
               (1.0 / (traj.values[i] + p.eps) - p.c);
    };
    double acc = 0.0;
    double prev = integrand(0);
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
        const double cur = integrand(i);
        acc += 0.5 * (prev + cur) * (traj.times[i] - traj.times[i - 1]);
        prev = cur;
    }
    return acc;
}

}  // namespace mfgpow
