#pragma once

// Random exchange rate extension. The unit value U(K, p) solves
//
//   0 = -(r+delta) U + (-delta K + lambda U) dU/dK + alpha(p) dU/dp
//       + nu d2U/dp2 + g(p)/(K+eps) - c
//
// on [0, k_max] x [p_min, p_max]. K keeps the 1D upwind treatment per
// p-slice; the price direction uses upwind first differences for alpha and
// the centred second difference for nu, with reflecting (mirror-ghost)
// boundaries at p_min and p_max. Relaxation is backward Euler in pseudo-time
// with one Thomas solve per p-slice and Gauss-Seidel lagging of the
// neighbouring slices; the converged iterate zeroes the full coupled upwind
// residual, so the splitting leaves no footprint in the solution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/solver1d.hpp"
#include "mfgpow/tridiag.hpp"

namespace mfgpow {

enum class DriftKind { constant, affine };
enum class RewardKind { identity, exponential_capped };

// Exchange-rate process dP = alpha(P) dt + sqrt(2 nu) dW on [p_min, p_max]
// (reflected), together with the reward modulation g(p) multiplying the
// per-capacity reward. g is kept inside [eps*c, A] so the profitable region
// stays bounded: identity means g == 1, exponential_capped means
// g(p) = clamp(exp(p), eps*c, A).
struct PriceProcess {
    DriftKind drift_kind = DriftKind::affine;
    double a = 0.0;        // alpha(p) = a + b*p (b ignored when constant)
    double b = -0.5;
    double nu = 0.05;      // diffusion intensity, > 0
    RewardKind reward_kind = RewardKind::identity;
    double cap_a = 1.0;    // upper bound A on g
    double p_min = -2.0;
    double p_max = 2.0;

    double alpha(double p) const {
        return drift_kind == DriftKind::constant ? a : a + b * p;
    }
    // Reward modulation g(p); the eps*c floor needs the model calibration.
    double reward(double p, const ModelParams& m) const {
        if (reward_kind == RewardKind::identity) return 1.0;
        return std::clamp(std::exp(p), m.eps * m.c, cap_a);
    }
    double reward_max() const {
        return reward_kind == RewardKind::identity ? 1.0 : cap_a;
    }
};

inline void validate_process(const PriceProcess& pp, const ModelParams& m) {
    detail::require_finite(pp.a, "PriceProcess.a");
    detail::require_finite(pp.b, "PriceProcess.b");
    detail::require_finite(pp.nu, "PriceProcess.nu");
    detail::require_finite(pp.cap_a, "PriceProcess.cap_a");
    detail::require_finite(pp.p_min, "PriceProcess.p_min");
    detail::require_finite(pp.p_max, "PriceProcess.p_max");
    if (!(pp.nu > 0.0)) throw ConfigError("PriceProcess.nu must be > 0");
    if (!(pp.p_min < pp.p_max)) {
        throw ConfigError("PriceProcess.p_min must be < p_max");
    }
    if (!(pp.cap_a > 0.0)) throw ConfigError("PriceProcess.cap_a must be > 0");
    // The reward bound eps*c <= g <= A must hold on the whole slab.
    if (pp.reward_kind == RewardKind::identity) {
        if (pp.cap_a < 1.0) {
            throw ConfigError("PriceProcess.cap_a must be >= 1 for the identity reward");
        }
        if (m.eps * m.c > 1.0) {
            throw ConfigError("PriceProcess reward floor eps*c exceeds the identity reward");
        }
    } else if (m.eps * m.c > pp.cap_a) {
        throw ConfigError("PriceProcess.cap_a must be >= eps*c");
    }
}

// Uniform price grid with n nodes on [p_min, p_max].
struct PGrid {
    double p_min = 0.0;
    double p_max = 0.0;
    std::size_t n = 0;

    double spacing() const {
        return (p_max - p_min) / static_cast<double>(n - 1);
    }
    double node(std::size_t j) const {
        return p_min + spacing() * static_cast<double>(j);
    }
};

inline void validate_pgrid(const PGrid& g) {
    detail::require_finite(g.p_min, "PGrid.p_min");
    detail::require_finite(g.p_max, "PGrid.p_max");
    if (!(g.p_min < g.p_max)) throw ConfigError("PGrid.p_min must be < p_max");
    if (g.n < 3) throw ConfigError("PGrid.n must be >= 3");
}

// Unit value sampled on the (K, p) grid; slice j (fixed price node) is the
// contiguous range values[j*grid_k.n .. j*grid_k.n + grid_k.n).
struct ValueFunction2D {
    Grid1D grid_k;
    PGrid grid_p;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const {
        return values[j * grid_k.n + i];
    }
    double& at(std::size_t i, std::size_t j) {
        return values[j * grid_k.n + i];
    }

    // Bilinear evaluation, clamped into the slab.
    double operator()(double k, double p) const {
        const double hk = grid_k.spacing();
        const double hp = grid_p.spacing();
        double sk = std::clamp(k, 0.0, grid_k.k_max) / hk;
        double sp = std::clamp(p - grid_p.p_min, 0.0, grid_p.p_max - grid_p.p_min) / hp;
        std::size_t i = std::min(static_cast<std::size_t>(sk), grid_k.n - 2);
        std::size_t j = std::min(static_cast<std::size_t>(sp), grid_p.n - 2);
        const double wk = sk - static_cast<double>(i);
        const double wp = sp - static_cast<double>(j);
        return (1.0 - wp) * ((1.0 - wk) * at(i, j) + wk * at(i + 1, j)) +
               wp * ((1.0 - wk) * at(i, j + 1) + wk * at(i + 1, j + 1));
    }
};

// Attractor curve: per price node, the capacity k_star(p) the drift steers to.
struct TargetCurve {
    std::vector<double> p_nodes;
    std::vector<double> k_star;
};

namespace detail {

// Full coupled residual with self-consistent upwinding; transport pointing
// outward at a slab boundary is dropped, mirror ghosts close the diffusion.
inline double master_residual_2d_impl(const ModelParams& m, const PriceProcess& pp,
                                      const ValueFunction2D& u,
                                      std::vector<double>* out = nullptr) {
    const std::size_t nk = u.grid_k.n, np = u.grid_p.n;
    const double hk = u.grid_k.spacing(), hp = u.grid_p.spacing();
    const double rho = m.r + m.delta;
    double worst = 0.0;
    if (out) out->assign(nk * np, 0.0);
    for (std::size_t j = 0; j < np; ++j) {
        const double p = u.grid_p.node(j);
        const double al = pp.alpha(p);
        const double g = pp.reward(p, m);
        for (std::size_t i = 0; i < nk; ++i) {
            const double ui = u.at(i, j);
            const double kref = (i == 0) ? hk : u.grid_k.node(i);
            double res = -rho * ui + g / (kref + m.eps) - m.c;

            const double ak = -m.delta * u.grid_k.node(i) + m.lambda * ui;
            if (ak >= 0.0) {
                if (i + 1 < nk) res += ak * (u.at(i + 1, j) - ui) / hk;
            } else if (i > 0) {
                res += ak * (ui - u.at(i - 1, j)) / hk;
            }
            if (al >= 0.0) {
                if (j + 1 < np) res += al * (u.at(i, j + 1) - ui) / hp;
            } else if (j > 0) {
                res += al * (ui - u.at(i, j - 1)) / hp;
            }
            const double left = (j > 0) ? u.at(i, j - 1) : u.at(i, j + 1);
            const double right = (j + 1 < np) ? u.at(i, j + 1) : u.at(i, j - 1);
            res += pp.nu * (left - 2.0 * ui + right) / (hp * hp);

            if (out) (*out)[j * nk + i] = res;
            worst = std::max(worst, std::abs(res));
        }
    }
    return worst;
}

}  // namespace detail

inline double master_residual_2d(const ModelParams& m, const PriceProcess& pp,
                                 const ValueFunction2D& u) {
    return detail::master_residual_2d_impl(m, pp, u);
}

// Solves the two-variable master equation; `np` price nodes span
// [pp.p_min, pp.p_max]. Requires k_max > A/c so every slice's far field is
// unprofitable.
inline ValueFunction2D solve_master_2d(const ModelParams& m, const PriceProcess& pp,
                                       const Grid1D& gk, std::size_t np,
                                       const SolverOptions& opt = {},
                                       SolveStats* stats = nullptr) {
    validate_params(m);
    validate_process(pp, m);
    validate_grid(gk);
    validate_options(opt);
    if (!(gk.k_max > pp.reward_max() / m.c)) {
        throw ConfigError("Grid1D.k_max must exceed A/c for the capped reward");
    }
    ValueFunction2D u;
    u.grid_k = gk;
    u.grid_p = PGrid{pp.p_min, pp.p_max, np};
    validate_pgrid(u.grid_p);

    const std::size_t nk = gk.n;
    const double hk = gk.spacing(), hp = u.grid_p.spacing();
    const double rho = m.r + m.delta;
    const double dcoef = pp.nu / (hp * hp);

    std::vector<double> alpha(np), gval(np), fbase(nk);
    for (std::size_t j = 0; j < np; ++j) {
        const double p = u.grid_p.node(j);
        alpha[j] = pp.alpha(p);
        gval[j] = pp.reward(p, m);
    }
    fbase[0] = 1.0 / (hk + m.eps);
    for (std::size_t i = 1; i < nk; ++i) fbase[i] = 1.0 / (gk.node(i) + m.eps);

    // Zero-drift start per slice.
    u.values.resize(nk * np);
    for (std::size_t j = 0; j < np; ++j) {
        for (std::size_t i = 0; i < nk; ++i) {
            u.at(i, j) = (gval[j] * fbase[i] - m.c) / rho;
        }
    }

    double amax = 0.0, almax = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
        almax = std::max(almax, std::abs(alpha[j]));
        for (std::size_t i = 0; i < nk; ++i) {
            amax = std::max(amax, std::abs(-m.delta * gk.node(i) + m.lambda * u.at(i, j)));
        }
    }
    double dtau = opt.cfl / (amax / hk + almax / hp + 2.0 * dcoef + rho + 1e-300);
    double prev_res = std::numeric_limits<double>::infinity();

    std::vector<double> lower(nk), diag(nk), upper(nk), rhs(nk), scratch(nk);

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        const double idtau = 1.0 / dtau;
        for (std::size_t j = 0; j < np; ++j) {
            // Price-direction couplings for this slice; Gauss-Seidel uses the
            // freshest stored neighbours.
            const double al = alpha[j];
            double pdiag = 2.0 * dcoef;
            double wlo = dcoef, whi = dcoef;   // weights on slices j-1, j+1
            if (j == 0) { wlo = 0.0; whi = 2.0 * dcoef; }
            if (j + 1 == np) { whi = 0.0; wlo = 2.0 * dcoef; }
            if (al >= 0.0) {
                if (j + 1 < np) { pdiag += al / hp; whi += al / hp; }
            } else {
                if (j > 0) { pdiag += -al / hp; wlo += -al / hp; }
            }
            for (std::size_t i = 0; i < nk; ++i) {
                const double ui = u.at(i, j);
                const double ak = -m.delta * gk.node(i) + m.lambda * ui;
                double up = 0.0, lo = 0.0, courant = 0.0;
                if (ak >= 0.0) {
                    if (i + 1 < nk) { courant = ak / hk; up = -courant; }
                } else {
                    if (i > 0) { courant = -ak / hk; lo = -courant; }
                }
                lower[i] = lo;
                upper[i] = up;
                diag[i] = idtau + rho + courant + pdiag;
                double nb = 0.0;
                if (wlo != 0.0) nb += wlo * u.at(i, j - 1);
                if (whi != 0.0) nb += whi * u.at(i, j + 1);
                rhs[i] = gval[j] * fbase[i] - m.c + ui * idtau + nb;
            }
            thomas_solve(lower, diag, upper, rhs, scratch);
            for (std::size_t i = 0; i < nk; ++i) u.at(i, j) = rhs[i];
        }

        const double rnorm = detail::master_residual_2d_impl(m, pp, u);
        if (stats) {
            stats->residual = rnorm;
            stats->iterations = iter;
        }
        if (rnorm <= opt.tol) {
            const double scale = amax + almax + rho + 1.0;
            for (std::size_t j = 0; j < np; ++j) {
                if (m.lambda * u.at(0, j) < -1e-10 * scale ||
                    -m.delta * gk.k_max + m.lambda * u.at(nk - 1, j) > 1e-10 * scale) {
                    throw SolverError(
                        "drift points outward at a boundary node; enlarge k_max");
                }
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
    throw SolverError("solve_master_2d: no convergence within max_iters (residual " +
                      std::to_string(stats ? stats->residual : -1.0) + ")");
}

// Root of lambda*U(., p_j) = delta*K per price node, exact on the linear
// segments of the slice. U non-increasing in K makes the root unique; a slice
// with no crossing means k_max is too small.
inline TargetCurve target_curve(const ValueFunction2D& u, const ModelParams& m) {
    const std::size_t nk = u.grid_k.n, np = u.grid_p.n;
    const double hk = u.grid_k.spacing();
    TargetCurve tc;
    tc.p_nodes.resize(np);
    tc.k_star.resize(np);
    for (std::size_t j = 0; j < np; ++j) {
        tc.p_nodes[j] = u.grid_p.node(j);
        double phi_prev = m.lambda * u.at(0, j);
        if (phi_prev <= 0.0) {
            tc.k_star[j] = 0.0;
            continue;
        }
        bool found = false;
        for (std::size_t i = 1; i < nk; ++i) {
            const double phi = -m.delta * u.grid_k.node(i) + m.lambda * u.at(i, j);
            if (phi <= 0.0) {
                const double du = (u.at(i, j) - u.at(i - 1, j)) / hk;
                tc.k_star[j] = u.grid_k.node(i - 1) + phi_prev / (m.delta - m.lambda * du);
                found = true;
                break;
            }
            phi_prev = phi;
        }
        if (!found) {
            throw SolverError("target_curve: drift has no root on the grid; enlarge k_max");
        }
    }
    return tc;
}

// Piecewise-linear evaluation of the target curve, clamped to its p-range.
inline double eval_target(const TargetCurve& tc, double p) {
    const std::size_t n = tc.p_nodes.size();
    if (p <= tc.p_nodes.front()) return tc.k_star.front();
    if (p >= tc.p_nodes.back()) return tc.k_star.back();
    const double hp = (tc.p_nodes.back() - tc.p_nodes.front()) /
                      static_cast<double>(n - 1);
    std::size_t j = static_cast<std::size_t>((p - tc.p_nodes.front()) / hp);
    if (j >= n - 1) j = n - 2;
    const double w = (p - tc.p_nodes[j]) / hp;
    return tc.k_star[j] * (1.0 - w) + tc.k_star[j + 1] * w;
}

// Coupled sample path of (K, P).
struct SdePath {
    std::vector<double> times;
    std::vector<double> k;
    std::vector<double> p;
};

namespace detail {

// Box-Muller on explicit 53-bit uniforms; identical output on every stdlib.
inline double std_normal(std::mt19937_64& rng) {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;  // (0,1]
    const double u2 = static_cast<double>(rng() >> 11) * kScale;          // [0,1)
    constexpr double kTwoPi = 6.283185307179586476925287;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Fold p back into [lo, hi] (reflecting boundary).
inline double reflect(double p, double lo, double hi) {
    while (p < lo || p > hi) {
        if (p > hi) {
            p = 2.0 * hi - p;
        } else {
            p = 2.0 * lo - p;
        }
    }
    return p;
}

}  // namespace detail

// Euler-Maruyama path of
//   dK = (-delta K + lambda U(K, P)) dt,  dP = alpha(P) dt + sqrt(2 nu) dW,
// P reflected into [p_min, p_max] by folding. dt <= 0 selects
// 1e-3 / max(delta, |b|). A fixed seed fixes the path bitwise.
inline SdePath simulate_sde(const ModelParams& m, const PriceProcess& pp,
                            const ValueFunction2D& u, double k0, double p0,
                            double horizon, double dt, std::uint64_t seed) {
    validate_params(m);
    validate_process(pp, m);
    if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    if (k0 < 0.0 || k0 > u.grid_k.k_max) {
        throw ConfigError("k0 must lie in [0, k_max]");
    }
    if (p0 < pp.p_min || p0 > pp.p_max) {
        throw ConfigError("p0 must lie in [p_min, p_max]");
    }
    if (dt <= 0.0) {
        const double b = pp.drift_kind == DriftKind::affine ? std::abs(pp.b) : 0.0;
        dt = 1e-3 / std::max(m.delta, b);
    }

    std::mt19937_64 rng(seed);
    SdePath path;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / dt));
    path.times.reserve(steps + 1);
    path.k.reserve(steps + 1);
    path.p.reserve(steps + 1);

    double t = 0.0, k = k0, p = p0;
    path.times.push_back(t);
    path.k.push_back(k);
    path.p.push_back(p);
    while (t < horizon) {
        const double step = std::min(dt, horizon - t);
        const double drift_k = -m.delta * k + m.lambda * u(k, p);
        k += step * drift_k;
        if (k < 0.0) k = 0.0;
        if (k > u.grid_k.k_max) {
            throw SolverError("simulate_sde: capacity path exits [0, k_max]");
        }
        p += step * pp.alpha(p) + std::sqrt(2.0 * pp.nu * step) * detail::std_normal(rng);
        if (!std::isfinite(p)) {
            throw SolverError("simulate_sde: price path diverged");
        }
        p = detail::reflect(p, pp.p_min, pp.p_max);
        t += step;
        path.times.push_back(t);
        path.k.push_back(k);
        path.p.push_back(p);
    }
    return path;
}

}  // namespace mfgpow
