#pragma once

// Planner form of the single-population model. The unit value U is the
// spatial derivative of the value Phi a monopolist owning the whole fleet
// would assign to the capacity stock K:
//
//   0 = -r Phi + max_a [ (-delta K + a) Phi' - a^2/(2 lambda) ]
//             + ln(K + eps) - c K,        state constraint at K = 0,
//
// equivalently 0 = -r Phi - delta K Phi' + (lambda/2)(Phi')^2 + ln(K+eps) - cK
// after inserting the optimal buildout rate a* = lambda Phi'. Note the
// transport term carries the derivative: only with -delta K Phi' does
// differentiating in K reproduce the unit-value equation
// 0 = -(r+delta)U + (-delta K + lambda U)U' + 1/(K+eps) - c, so that is the
// form implemented (a version without the derivative is not consistent with
// U being the gradient of Phi, and is not what this module solves).
//
// eps must be strictly positive here (the payoff is ln(K+eps)); lambda = 0
// is admitted and collapses the planner to pure decay transport.
//
// Discretisation: at each node the Hamiltonian max is taken over three
// closed-form candidates, the one-sided differences paired with the
// adjustment rate they induce (forward needs -delta K + a >= 0, backward
// needs <= 0) and the standing rate a = delta K that freezes the stock. The
// state constraint at K = 0 is automatic: no admissible candidate couples
// node 0 to the left. The solver is policy iteration: freezing the rates
// gives a strictly diagonally dominant tridiagonal system solved exactly,
// then the rates are re-optimised on the new iterate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/solver1d.hpp"
#include "mfgpow/tridiag.hpp"

namespace mfgpow {

struct PotentialSolution {
    Grid1D grid;
    std::vector<double> phi_values;
};

// Baseline calibration with the regularisation this module needs.
inline ModelParams default_potential_params(ModelParams p = {}) {
    p.eps = 1e-3;
    return p;
}

namespace detail {

inline void validate_planner(const ModelParams& p) {
    ModelParams q = p;
    if (q.lambda == 0.0) q.lambda = 1.0;  // planner without adjustment ability
    validate_params(q);
    if (!(p.eps > 0.0)) {
        throw ConfigError("ModelParams.eps must be > 0 for the planner payoff");
    }
}

inline std::vector<double> planner_payoff(const ModelParams& p, const Grid1D& g) {
    std::vector<double> f(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        f[i] = std::log(g.node(i) + p.eps) - p.c * g.node(i);
    }
    return f;
}

struct PlannerControl {
    double value = 0.0;  // optimised Hamiltonian contribution at the node
    double rate = 0.0;   // maximising adjustment rate a
};

// Exact per-node maximum over the admissible candidates given the current
// iterate. The quadratic in a is concave, so each one-sided branch peaks at
// a = lambda q or at the standing rate if the speed constraint binds.
inline PlannerControl best_control(const ModelParams& p, const Grid1D& g,
                                   const std::vector<double>& phi,
                                   std::size_t i) {
    const double h = g.spacing();
    const double dk = p.delta * g.node(i);

    if (p.lambda == 0.0) {
        if (i == 0) return {0.0, 0.0};
        return {-dk * (phi[i] - phi[i - 1]) / h, 0.0};
    }

    PlannerControl best{-0.5 * dk * dk / p.lambda, dk};  // hold the stock fixed
    if (i + 1 < g.n) {
        const double q = (phi[i + 1] - phi[i]) / h;
        if (p.lambda * q >= dk) {
            const double v = -dk * q + 0.5 * p.lambda * q * q;
            if (v > best.value) best = {v, p.lambda * q};
        }
    }
    if (i > 0) {
        const double q = (phi[i] - phi[i - 1]) / h;
        if (p.lambda * q <= dk) {
            const double v = -dk * q + 0.5 * p.lambda * q * q;
            if (v > best.value) best = {v, p.lambda * q};
        }
    }
    return best;
}

}  // namespace detail

// Residual of the discretised planner equation at every node of `s`.
inline std::vector<double> hjb_residual(const ModelParams& p,
                                        const PotentialSolution& s) {
    detail::validate_planner(p);
    const auto f = detail::planner_payoff(p, s.grid);
    std::vector<double> res(s.grid.n);
    for (std::size_t i = 0; i < s.grid.n; ++i) {
        const auto pc = detail::best_control(p, s.grid, s.phi_values, i);
        res[i] = -p.r * s.phi_values[i] + pc.value + f[i];
    }
    return res;
}

// Solves the planner equation on `g` by policy iteration.
inline PotentialSolution solve_hjb(const ModelParams& p, const Grid1D& g,
                                   const SolverOptions& opt = {},
                                   SolveStats* stats = nullptr) {
    detail::validate_planner(p);
    validate_grid(g);
    validate_options(opt);
    if (!(g.k_max > 1.0 / p.c - p.eps)) {
        throw ConfigError("Grid1D.k_max must exceed 1/c - eps");
    }

    const double h = g.spacing();
    const std::size_t n = g.n;
    const auto f = detail::planner_payoff(p, g);

    std::vector<double> phi(n), rate(n);
    for (std::size_t i = 0; i < n; ++i) phi[i] = f[i] / p.r;
    std::vector<double> lower(n), diag(n), upper(n), rhs(n), scratch(n);

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        double rnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto pc = detail::best_control(p, g, phi, i);
            rate[i] = pc.rate;
            rnorm = std::max(rnorm, std::abs(-p.r * phi[i] + pc.value + f[i]));
        }
        if (stats) {
            stats->residual = rnorm;
            stats->iterations = iter;
        }
        if (rnorm <= opt.tol) {
            return PotentialSolution{g, std::move(phi)};
        }

        for (std::size_t i = 0; i < n; ++i) {
            const double beta = -p.delta * g.node(i) + rate[i];
            const double out = std::max(beta, 0.0) / h;
            const double in = std::max(-beta, 0.0) / h;
            lower[i] = -in;
            upper[i] = -out;
            diag[i] = p.r + out + in;
            rhs[i] = f[i];
            if (p.lambda > 0.0) rhs[i] -= 0.5 * rate[i] * rate[i] / p.lambda;
        }
        thomas_solve(lower, diag, upper, rhs, scratch);
        phi.swap(rhs);
    }
    throw SolverError("solve_hjb: no convergence within max_iters");
}

// Sup-norm gap between the centered difference of the planner value and a
// unit value solved on the same grid, taken over interior nodes.
inline double potential_check(const PotentialSolution& s, const ValueFunction1D& u) {
    if (s.grid.k_max != u.grid.k_max || s.grid.n != u.grid.n) {
        throw ConfigError("potential_check: solutions use different grids");
    }
    const double h = s.grid.spacing();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < s.grid.n; ++i) {
        const double q = (s.phi_values[i + 1] - s.phi_values[i - 1]) / (2.0 * h);
        worst = std::max(worst, std::abs(q - u.values[i]));
    }
    return worst;
}

// Root of delta K = lambda Phi' (centered differences), the capacity the
// planner holds fixed. Linear interpolation between the bracketing interior
// nodes, as in the game solver's drift root.
inline double planner_stationary(const ModelParams& p, const PotentialSolution& s) {
    detail::validate_planner(p);
    const Grid1D& g = s.grid;
    const double h = g.spacing();
    auto w = [&](std::size_t i) {
        const double q = (s.phi_values[i + 1] - s.phi_values[i - 1]) / (2.0 * h);
        return -p.delta * g.node(i) + p.lambda * q;
    };
    double prev = w(1);
    if (prev <= 0.0) return g.node(1);
    for (std::size_t i = 2; i + 1 < g.n; ++i) {
        const double cur = w(i);
        if (cur <= 0.0) {
            const double s01 = prev / (prev - cur);
            return g.node(i - 1) + s01 * h;
        }
        prev = cur;
    }
    throw SolverError("planner_stationary: drift has no root on the grid");
}

}  // namespace mfgpow
