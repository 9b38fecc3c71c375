#pragma once

// Core vocabulary of the mining game: calibration parameters, uniform grids
// on [0, k_max], sampled unit-value functions, simulated capacity paths, and
// the stationary-state report. Everything downstream consumes these types.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgpow/errors.hpp"

namespace mfgpow {

// Single-population calibration.
//   r      discount rate
//   delta  rate of technological progress (real capacity depreciates at delta)
//   lambda speed at which aggregate capacity responds to unit value
//   c      running cost per unit of real hashrate
//   eps    reward regularisation, flow payoff is 1/(K+eps) - c
//
// Constraints: r, delta, lambda, c > 0; eps >= 0; c*eps < 1 (otherwise mining
// never pays and the model degenerates). All fields must be finite.
struct ModelParams {
    double r = 0.05;
    double delta = 0.2;
    double lambda = 1.0;
    double c = 0.02;
    double eps = 0.0;
};

namespace detail {

inline void require_finite(double v, const char* field) {
    if (!std::isfinite(v)) {
        throw ConfigError(std::string(field) + " must be finite");
    }
}

}  // namespace detail

// Rejects invalid parameter sets, naming the offending field.
inline void validate_params(const ModelParams& p) {
    detail::require_finite(p.r, "ModelParams.r");
    detail::require_finite(p.delta, "ModelParams.delta");
    detail::require_finite(p.lambda, "ModelParams.lambda");
    detail::require_finite(p.c, "ModelParams.c");
    detail::require_finite(p.eps, "ModelParams.eps");
    if (p.r <= 0.0) throw ConfigError("ModelParams.r must be > 0");
    if (p.delta <= 0.0) throw ConfigError("ModelParams.delta must be > 0");
    if (p.lambda <= 0.0) throw ConfigError("ModelParams.lambda must be > 0");
    if (p.c <= 0.0) throw ConfigError("ModelParams.c must be > 0");
    if (p.eps < 0.0) throw ConfigError("ModelParams.eps must be >= 0");
    if (p.c * p.eps >= 1.0) {
        throw ConfigError("ModelParams.eps violates c*eps < 1");
    }
}

// Uniform grid with n nodes on [0, k_max]; node i sits at i*h, h = k_max/(n-1).
struct Grid1D {
    double k_max = 0.0;
    std::size_t n = 0;

    double spacing() const { return k_max / static_cast<double>(n - 1); }
    double node(std::size_t i) const {
        return k_max * static_cast<double>(i) / static_cast<double>(n - 1);
    }
};

inline void validate_grid(const Grid1D& g) {
    detail::require_finite(g.k_max, "Grid1D.k_max");
    if (g.k_max <= 0.0) throw ConfigError("Grid1D.k_max must be > 0");
    if (g.n < 3) throw ConfigError("Grid1D.n must be >= 3");
}

// Unit value sampled at the nodes of `grid`.
struct ValueFunction1D {
    Grid1D grid;
    std::vector<double> values;

    // Piecewise-linear evaluation; queries are clamped into [0, k_max].
    double operator()(double k) const {
        const double h = grid.spacing();
        if (k <= 0.0) return values.front();
        if (k >= grid.k_max) return values.back();
        const double s = k / h;
        std::size_t i = static_cast<std::size_t>(s);
        if (i >= grid.n - 1) i = grid.n - 2;
        const double w = s - static_cast<double>(i);
        return values[i] * (1.0 - w) + values[i + 1] * w;
    }
};

inline bool non_increasing(const std::vector<double>& v, double slack = 0.0) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        if (v[i + 1] > v[i] + slack) return false;
    }
    return true;
}

// Simulated capacity path. Times are non-decreasing from 0; a repeated time
// stamp is admitted only to encode an instantaneous jump (reflected barrier
// starts), otherwise times increase strictly.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> values;
};

inline void validate_trajectory(const Trajectory& t) {
    if (t.times.size() != t.values.size()) {
        throw ConfigError("Trajectory.times and Trajectory.values differ in length");
    }
    if (t.times.empty()) throw ConfigError("Trajectory.times must be non-empty");
    for (std::size_t i = 0; i + 1 < t.times.size(); ++i) {
        if (t.times[i + 1] < t.times[i]) {
            throw ConfigError("Trajectory.times must be non-decreasing");
        }
    }
}

// Stationary state of the single-population game.
//   k_star  stationary real hashrate, pi_star = k_star * u_star
// residual_norm/iterations report how the numbers were obtained (0 iterations
// for closed-form evaluations).
struct EquilibriumReport {
    double k_star = 0.0;
    double u_star = 0.0;
    double pi_star = 0.0;
    double residual_norm = 0.0;
    std::size_t iterations = 0;
};

// Nominal-to-real hashrate transform: one nominal unit bought at t0 is worth
// exp(-delta*(t-t0)) real units at time t. Exact inverse of the growth e^{delta t}.
inline double real_hashrate(double nominal, double t, double t0, double delta) {
    return nominal * std::exp(-delta * (t - t0));
}

}  // namespace mfgpow
