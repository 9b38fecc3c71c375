#pragma once

// Free-entry model with no resale value. Entry is unrestricted, so the unit
// value U can never stay strictly positive; machines cannot be sold, so
// capacity can shrink no faster than the decay rate delta. Two routes to the
// same limit object:
//
//   penalized   0 = -(r+delta)U + (-delta K + (1/eta)(U)_+) U' + 1/(K+eps) - c
//   limit       max( (r+delta)U + delta K U' - 1/(K+eps) + c , U ) = 0
//
// The penalized equation is the single-population master equation with the
// response lambda*U steepened to (1/eta)(U)_+; solutions converge uniformly
// as eta -> 0. The limit complementarity problem pins U at zero wherever
// running a marginal machine is profitable and switches to the pure-decay
// transport equation elsewhere. The contact point
//
//   k_star = inf{ K : U(K) < 0 }
//
// is the stationary capacity: starting below it, entry fills the gap
// instantly; starting above it, capacity decays at rate delta until it
// lands there.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/solver1d.hpp"

namespace mfgpow {

struct PenalizedSolution {
    double eta = 0.0;
    ValueFunction1D u;
};

struct ObstacleSolution {
    ValueFunction1D u;
    double k_star = 0.0;  // inf{K : U(K) < 0} on the interpolant
};

// One row of the vanishing-friction study. k_star_eta is the closed-form
// stationary capacity of the penalized model (lambda = 1/eta); sup_gap is
// the sup-norm distance between the penalized and limit solutions.
struct PenalizedRow {
    double eta = 0.0;
    double k_star_eta = 0.0;
    double sup_gap = 0.0;
};

namespace detail {

inline void require_eta(double eta) {
    require_finite(eta, "eta");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
}

inline void require_far_field(const ModelParams& p, const Grid1D& g) {
    if (!(g.k_max > 1.0 / p.c - p.eps)) {
        throw ConfigError("Grid1D.k_max must exceed 1/c - eps");
    }
}

}  // namespace detail

// Residual of the penalized equation at every node, drift evaluated
// self-consistently at `u`.
inline std::vector<double> penalized_residual_1d(const ModelParams& p, double eta,
                                                 const ValueFunction1D& u) {
    detail::require_eta(eta);
    const auto f = detail::flow_payoff(p, u.grid);
    return detail::upwind_residual(
        u.grid, p.r + p.delta, f, u.values,
        [&](std::size_t i, double ui) {
            return -p.delta * u.grid.node(i) + std::max(ui, 0.0) / eta;
        });
}

// Solves the penalized equation on `g`. Wherever the solution is
// non-negative it coincides with the master equation at lambda = 1/eta, so
// its stationary capacity is the closed form evaluated there.
inline PenalizedSolution solve_penalized(const ModelParams& p, double eta,
                                         const Grid1D& g,
                                         const SolverOptions& opt = {},
                                         SolveStats* stats = nullptr) {
    validate_params(p);
    detail::require_eta(eta);
    validate_grid(g);
    validate_options(opt);
    detail::require_far_field(p, g);

    const double rho = p.r + p.delta;
    const auto f = detail::flow_payoff(p, g);
    std::vector<double> u(g.n);
    for (std::size_t i = 0; i < g.n; ++i) u[i] = f[i] / rho;

    auto values = detail::relax_upwind_1d(
        g, rho, f, std::move(u), opt,
        [&](std::size_t i, double ui) {
            return -p.delta * g.node(i) + std::max(ui, 0.0) / eta;
        },
        stats);
    return PenalizedSolution{eta, ValueFunction1D{g, std::move(values)}};
}

// Nodewise complementarity defect max(A_i, U_i), where A_i is the pure-decay
// operator (r+delta)U + delta K U'_upwind - 1/(K+eps) + c. A solution keeps
// every entry in [-tol, tol]: U <= 0 everywhere and at each node either U
// vanishes (with A <= 0, entry still profitable) or A vanishes (value set by
// the transport equation).
inline std::vector<double> obstacle_residual(const ModelParams& p,
                                             const ValueFunction1D& u) {
    const auto f = detail::flow_payoff(p, u.grid);
    auto res = detail::upwind_residual(
        u.grid, p.r + p.delta, f, u.values,
        [&](std::size_t i, double) { return -p.delta * u.grid.node(i); });
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        res[i] = std::max(-res[i], u.values[i]);
    }
    return res;
}

// Solves the limit complementarity problem by projected pseudo-time
// iteration: each sweep takes one backward Euler step of the transport
// branch and clamps at zero from above. The drift -delta K never points
// right, so the implicit step is a forward substitution; the clamp is
// applied as the substitution advances, which makes the fixed point the
// exact discrete complementarity solution for every step size.
inline ObstacleSolution solve_obstacle(const ModelParams& p, const Grid1D& g,
                                       const SolverOptions& opt = {},
                                       SolveStats* stats = nullptr) {
    validate_params(p);
    validate_grid(g);
    validate_options(opt);
    detail::require_far_field(p, g);

    const double rho = p.r + p.delta;
    const double h = g.spacing();
    const std::size_t n = g.n;
    const auto f = detail::flow_payoff(p, g);

    std::vector<double> u(n), courant(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::min(f[i] / rho, 0.0);
        courant[i] = p.delta * g.node(i) / h;
    }

    double dtau = opt.cfl * h / (p.delta * g.k_max + rho * h);
    double prev_res = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        const double idtau = 1.0 / dtau;
        double left = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double trial =
                (f[i] + idtau * u[i] + courant[i] * left) / (idtau + rho + courant[i]);
            u[i] = std::min(trial, 0.0);
            left = u[i];
        }

        const auto res = obstacle_residual(p, ValueFunction1D{g, u});
        const double rnorm = sup_norm(res);
        if (stats) {
            stats->residual = rnorm;
            stats->iterations = iter;
        }
        if (rnorm <= opt.tol) {
            ObstacleSolution sol{ValueFunction1D{g, std::move(u)}, 0.0};
            std::size_t j = 0;
            while (j < n && !(sol.u.values[j] < 0.0)) ++j;
            if (j == n) {
                throw SolverError(
                    "solve_obstacle: value never goes negative; enlarge k_max");
            }
            sol.k_star = (j == 0) ? 0.0 : g.node(j - 1);
            return sol;
        }
        if (rnorm < prev_res) {
            dtau = std::min(dtau * 2.0, 1e12);
        } else {
            dtau = std::max(dtau * 0.25, 1e-12);
        }
        prev_res = rnorm;
    }
    throw SolverError("solve_obstacle: no convergence within max_iters");
}

// Limit trajectory. Below k_star entry is instantaneous: the jump is
// recorded as a duplicated t = 0 sample (no fake intermediate dynamics).
// Above k_star the path decays as k0*exp(-delta t) and the exact landing
// time is inserted as a sample; afterwards the path is flat at k_star.
inline Trajectory simulate_obstacle_trajectory(const ModelParams& p,
                                               const ObstacleSolution& sol,
                                               double k0, double horizon,
                                               double dt = 0.0) {
    validate_params(p);
    if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    if (!(k0 >= 0.0)) throw ConfigError("k0 must be >= 0");
    if (dt <= 0.0) dt = 0.01 / p.delta;

    Trajectory traj;
    const double ks = sol.k_star;

    double t_hit = 0.0;
    if (k0 > ks) {
        t_hit = (ks > 0.0) ? std::log(k0 / ks) / p.delta
                           : std::numeric_limits<double>::infinity();
    }

    traj.times.push_back(0.0);
    traj.values.push_back(k0);
    if (k0 < ks) {
        traj.times.push_back(0.0);
        traj.values.push_back(ks);
    }

    bool landed = false;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / dt));
    for (std::size_t s = 1; s <= steps; ++s) {
        const double t = std::min(static_cast<double>(s) * dt, horizon);
        if (!landed && t >= t_hit) {
            if (t_hit > 0.0 && t > t_hit) {
                traj.times.push_back(t_hit);
                traj.values.push_back(ks);
            }
            landed = true;
        }
        traj.times.push_back(t);
        traj.values.push_back(landed ? ks : k0 * std::exp(-p.delta * t));
        if (t >= horizon) break;
    }
    return traj;
}

// Vanishing-friction study: penalized solves chained along a strictly
// decreasing eta sequence (each warm-started from the previous solution),
// compared in sup norm against the limit solution on the same grid.
inline std::vector<PenalizedRow> convergence_study(const ModelParams& p,
                                                   const std::vector<double>& etas,
                                                   const Grid1D& g,
                                                   const SolverOptions& opt = {}) {
    validate_params(p);
    if (etas.empty()) throw ConfigError("eta sequence must be non-empty");
    for (std::size_t s = 0; s < etas.size(); ++s) {
        detail::require_eta(etas[s]);
        if (s > 0 && !(etas[s] < etas[s - 1])) {
            throw ConfigError("eta sequence must be strictly decreasing");
        }
    }

    const ObstacleSolution limit = solve_obstacle(p, g, opt);
    const double rho = p.r + p.delta;
    const auto f = detail::flow_payoff(p, g);

    std::vector<double> u(g.n);
    for (std::size_t i = 0; i < g.n; ++i) u[i] = f[i] / rho;

    std::vector<PenalizedRow> table;
    table.reserve(etas.size());
    for (const double eta : etas) {
        u = detail::relax_upwind_1d(
            g, rho, f, std::move(u), opt,
            [&](std::size_t i, double ui) {
                return -p.delta * g.node(i) + std::max(ui, 0.0) / eta;
            },
            nullptr);

        ModelParams steep = p;
        steep.lambda = 1.0 / eta;
        PenalizedRow row;
        row.eta = eta;
        row.k_star_eta = stationary_state_closed_form(steep);
        row.sup_gap = 0.0;
        for (std::size_t i = 0; i < g.n; ++i) {
            row.sup_gap = std::max(row.sup_gap, std::abs(u[i] - limit.u.values[i]));
        }
        table.push_back(row);
    }
    return table;
}

}  // namespace mfgpow
