#pragma once

// Two populations holding stocks K and L of machines with distinct costs.
// The pair (U, V) solves
//
//   0 = -(r1+delta) U + (-delta K + lam1 U) dU/dK + (-delta L + lam2 V) dU/dL
//       + max{ 1/(phi+psi+eps) - c1, 0 }
//   0 = -(r2+delta) V + (same drift field applied to V)
//       + max{ 1/(phi+psi+eps) - c2, 0 }
//
// on [0, k_max] x [0, l_max], where (phi, psi) is the participation pair: the
// higher-cost population withdraws machines first until its marginal reward
// matches its cost; with equal costs both shrink in proportion to K:L. The
// reward denominator is floored at min(hK, hL), which regularises the corner
// node exactly as the 1D solver regularises K = 0.
//
// Discretisation: first-order upwind in both state directions, no boundary
// data (the drift points inward at all four edges of a valid solve), backward
// Euler pseudo-time with a Thomas solve per K-line and Gauss-Seidel lagging
// across L-lines, alternating U and V updates. The stochastic two-country
// variant adds the price dimension exactly as the common-noise solver does
// and relaxes slab by slab.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mfgpow/common_noise.hpp"
#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/solver1d.hpp"
#include "mfgpow/tridiag.hpp"

namespace mfgpow {

// Shared progress rate delta; everything else is per population. Reservation
// utilities are fixed at zero, so flow payoffs are clamped below at zero.
struct TwoPopParams {
    double r1 = 0.05;
    double r2 = 0.05;
    double lam1 = 1.0;
    double lam2 = 1.0;
    double c1 = 0.02;
    double c2 = 0.3;
    double delta = 0.2;
    double eps = 0.0;
};

inline void validate_2pop(const TwoPopParams& tp) {
    detail::require_finite(tp.r1, "TwoPopParams.r1");
    detail::require_finite(tp.r2, "TwoPopParams.r2");
    detail::require_finite(tp.lam1, "TwoPopParams.lam1");
    detail::require_finite(tp.lam2, "TwoPopParams.lam2");
    detail::require_finite(tp.c1, "TwoPopParams.c1");
    detail::require_finite(tp.c2, "TwoPopParams.c2");
    detail::require_finite(tp.delta, "TwoPopParams.delta");
    detail::require_finite(tp.eps, "TwoPopParams.eps");
    if (tp.r1 <= 0.0) throw ConfigError("TwoPopParams.r1 must be > 0");
    if (tp.r2 <= 0.0) throw ConfigError("TwoPopParams.r2 must be > 0");
    if (tp.lam1 <= 0.0) throw ConfigError("TwoPopParams.lam1 must be > 0");
    if (tp.lam2 <= 0.0) throw ConfigError("TwoPopParams.lam2 must be > 0");
    if (tp.c1 <= 0.0) throw ConfigError("TwoPopParams.c1 must be > 0");
    if (tp.c2 <= 0.0) throw ConfigError("TwoPopParams.c2 must be > 0");
    if (tp.delta <= 0.0) throw ConfigError("TwoPopParams.delta must be > 0");
    if (tp.eps < 0.0) throw ConfigError("TwoPopParams.eps must be >= 0");
}

// Actually-running hashrates. phi belongs to the population with cost c1 and
// stock K, psi to the one with cost c2 and stock L.
struct Participation {
    double phi = 0.0;
    double psi = 0.0;
};

// Resolves (phi, psi) for installed stocks (k, l): full participation when
// the marginal reward covers both costs; otherwise the higher-cost population
// shrinks to indifference first (active mass 1/c_high - other - eps, floored
// at 0), then the lower-cost one re-checks. Two passes reach the fixed point:
// a partially active high-cost side pins the reward at c_high > c_low, so the
// low-cost side only ever shrinks when the high-cost side is fully out.
// Equal costs shrink both stocks in proportion to k : l.
inline Participation participation(double k, double l, const TwoPopParams& tp) {
    if (!(k >= 0.0) || !(l >= 0.0)) {
        throw ConfigError("participation requires k >= 0 and l >= 0");
    }
    if (tp.c1 == tp.c2) {
        if (1.0 / (k + l + tp.eps) >= tp.c1) return {k, l};
        const double total = std::max(0.0, 1.0 / tp.c1 - tp.eps);
        if (total <= 0.0 || k + l <= 0.0) return {0.0, 0.0};
        return {total * k / (k + l), total * l / (k + l)};
    }
    const bool first_low = tp.c1 < tp.c2;
    const double c_lo = first_low ? tp.c1 : tp.c2;
    const double c_hi = first_low ? tp.c2 : tp.c1;
    const double s_lo = first_low ? k : l;
    const double s_hi = first_low ? l : k;

    double a_lo = s_lo, a_hi = s_hi;
    if (1.0 / (a_lo + s_hi + tp.eps) < c_hi) {
        a_hi = std::max(0.0, 1.0 / c_hi - a_lo - tp.eps);
    }
    if (1.0 / (a_hi + s_lo + tp.eps) < c_lo) {
        a_lo = std::max(0.0, 1.0 / c_lo - a_hi - tp.eps);
    }
    return first_low ? Participation{a_lo, a_hi} : Participation{a_hi, a_lo};
}

// (U, V) sampled on the (K, L) grid; row j (fixed L node) is contiguous.
struct ValueFunctionPair {
    Grid1D grid_k;
    Grid1D grid_l;
    std::vector<double> u_values;
    std::vector<double> v_values;

    double u_at(std::size_t i, std::size_t j) const { return u_values[j * grid_k.n + i]; }
    double v_at(std::size_t i, std::size_t j) const { return v_values[j * grid_k.n + i]; }
    double& u_at(std::size_t i, std::size_t j) { return u_values[j * grid_k.n + i]; }
    double& v_at(std::size_t i, std::size_t j) { return v_values[j * grid_k.n + i]; }

    double u(double k, double l) const { return bilinear(u_values, k, l); }
    double v(double k, double l) const { return bilinear(v_values, k, l); }

  private:
    double bilinear(const std::vector<double>& vals, double k, double l) const {
        const double sk = std::clamp(k, 0.0, grid_k.k_max) / grid_k.spacing();
        const double sl = std::clamp(l, 0.0, grid_l.k_max) / grid_l.spacing();
        std::size_t i = std::min(static_cast<std::size_t>(sk), grid_k.n - 2);
        std::size_t j = std::min(static_cast<std::size_t>(sl), grid_l.n - 2);
        const double wk = sk - static_cast<double>(i);
        const double wl = sl - static_cast<double>(j);
        const std::size_t nk = grid_k.n;
        return (1.0 - wl) * ((1.0 - wk) * vals[j * nk + i] + wk * vals[j * nk + i + 1]) +
               wl * ((1.0 - wk) * vals[(j + 1) * nk + i] + wk * vals[(j + 1) * nk + i + 1]);
    }
};

namespace detail {

// Node rewards for both populations; the denominator phi+psi+eps is floored
// at min(hK, hL) + eps so the (0,0) node stays finite at eps = 0.
inline void pair_payoffs(const TwoPopParams& tp, const Grid1D& gk, const Grid1D& gl,
                         double cost2_scale, double reward2_scale,
                         std::vector<double>& fu, std::vector<double>& fv) {
    const double hmin = std::min(gk.spacing(), gl.spacing());
    TwoPopParams eff = tp;
    eff.c2 = tp.c2 / cost2_scale;
    fu.resize(gk.n * gl.n);
    fv.resize(gk.n * gl.n);
    for (std::size_t j = 0; j < gl.n; ++j) {
        for (std::size_t i = 0; i < gk.n; ++i) {
            const Participation act = participation(gk.node(i), gl.node(j), eff);
            const double denom = std::max(act.phi + act.psi, hmin) + tp.eps;
            fu[j * gk.n + i] = std::max(1.0 / denom - tp.c1, 0.0);
            fv[j * gk.n + i] = std::max(reward2_scale / denom - tp.c2, 0.0);
        }
    }
}

// One Gauss-Seidel sweep over a (K, L) slab for one of the two value arrays:
// backward Euler step with the K-direction solved implicitly per L-line, the
// L-direction upwinded against the lagged neighbours. Callers alternate the
// sweep direction so upwind dependencies of either sign resolve within two
// sweeps. extra_diag/extra_rhs carry the price-direction couplings of the
// stochastic variant (zero for the deterministic system). `mine` is the
// relaxed array; `drift_l` supplies the L-drift at a node (depends on V only)
// and `drift_k` the K-drift (U only).
template <typename DriftK, typename DriftL, typename ExtraRhs>
void sweep_pair_slab(const Grid1D& gk, const Grid1D& gl, double rho,
                     const std::vector<double>& f, double idtau, double extra_diag,
                     bool ascending, DriftK&& drift_k, DriftL&& drift_l,
                     ExtraRhs&& extra_rhs, std::vector<double>& lower,
                     std::vector<double>& diag, std::vector<double>& upper,
                     std::vector<double>& rhs, std::vector<double>& scratch,
                     double* mine) {
    const std::size_t nk = gk.n, nl = gl.n;
    const double hk = gk.spacing(), hl = gl.spacing();
    for (std::size_t jj = 0; jj < nl; ++jj) {
        const std::size_t j = ascending ? jj : nl - 1 - jj;
        for (std::size_t i = 0; i < nk; ++i) {
            const double bl = drift_l(i, j);
            double ldiag = 0.0, lrhs = 0.0;
            if (bl >= 0.0) {
                if (j + 1 < nl) {
                    ldiag = bl / hl;
                    lrhs = ldiag * mine[(j + 1) * nk + i];
                }
            } else if (j > 0) {
                ldiag = -bl / hl;
                lrhs = ldiag * mine[(j - 1) * nk + i];
            }
            const double bk = drift_k(i, j);
            double up = 0.0, lo = 0.0, courant = 0.0;
            if (bk >= 0.0) {
                if (i + 1 < nk) { courant = bk / hk; up = -courant; }
            } else {
                if (i > 0) { courant = -bk / hk; lo = -courant; }
            }
            lower[i] = lo;
            upper[i] = up;
            diag[i] = idtau + rho + courant + ldiag + extra_diag;
            rhs[i] = f[j * nk + i] + mine[j * nk + i] * idtau + lrhs +
                     extra_rhs(i, j);
        }
        thomas_solve(lower, diag, upper, rhs, scratch);
        for (std::size_t i = 0; i < nk; ++i) mine[j * nk + i] = rhs[i];
    }
}

// Self-consistent upwind residual over one slab; outward boundary transport
// is dropped, extra_res carries price-direction terms.
template <typename DriftK, typename DriftL, typename ExtraRes>
double pair_slab_residual(const Grid1D& gk, const Grid1D& gl, double rho,
                          const std::vector<double>& f, DriftK&& drift_k,
                          DriftL&& drift_l, ExtraRes&& extra_res, const double* mine) {
    const std::size_t nk = gk.n, nl = gl.n;
    const double hk = gk.spacing(), hl = gl.spacing();
    double worst = 0.0;
    for (std::size_t j = 0; j < nl; ++j) {
        for (std::size_t i = 0; i < nk; ++i) {
            const double w = mine[j * nk + i];
            double res = -rho * w + f[j * nk + i] + extra_res(i, j);
            const double bk = drift_k(i, j);
            if (bk >= 0.0) {
                if (i + 1 < nk) res += bk * (mine[j * nk + i + 1] - w) / hk;
            } else if (i > 0) {
                res += bk * (w - mine[j * nk + i - 1]) / hk;
            }
            const double bl = drift_l(i, j);
            if (bl >= 0.0) {
                if (j + 1 < nl) res += bl * (mine[(j + 1) * nk + i] - w) / hl;
            } else if (j > 0) {
                res += bl * (w - mine[(j - 1) * nk + i]) / hl;
            }
            worst = std::max(worst, std::abs(res));
        }
    }
    return worst;
}

}  // namespace detail

// Residual of the coupled discrete system at `uv`, sup over both equations.
inline double system_residual(const TwoPopParams& tp, const ValueFunctionPair& uv) {
    const Grid1D& gk = uv.grid_k;
    const Grid1D& gl = uv.grid_l;
    std::vector<double> fu, fv;
    detail::pair_payoffs(tp, gk, gl, 1.0, 1.0, fu, fv);
    auto bk = [&](std::size_t i, std::size_t j) {
        return -tp.delta * gk.node(i) + tp.lam1 * uv.u_at(i, j);
    };
    auto bl = [&](std::size_t i, std::size_t j) {
        return -tp.delta * gl.node(j) + tp.lam2 * uv.v_at(i, j);
    };
    auto zero = [](std::size_t, std::size_t) { return 0.0; };
    const double ru = detail::pair_slab_residual(gk, gl, tp.r1 + tp.delta, fu, bk, bl,
                                                 zero, uv.u_values.data());
    const double rv = detail::pair_slab_residual(gk, gl, tp.r2 + tp.delta, fv, bk, bl,
                                                 zero, uv.v_values.data());
    return std::max(ru, rv);
}

// Solves the two-population system on [0, gk.k_max] x [0, gl.k_max]. Both
// axes must extend past the zero-profit total 1/min(c1, c2) so the far field
// is unprofitable for everyone.
inline ValueFunctionPair solve_system(const TwoPopParams& tp, const Grid1D& gk,
                                      const Grid1D& gl, const SolverOptions& opt = {},
                                      SolveStats* stats = nullptr) {
    validate_2pop(tp);
    validate_grid(gk);
    validate_grid(gl);
    validate_options(opt);
    const double reach = 1.0 / std::min(tp.c1, tp.c2);
    if (!(gk.k_max > reach) || !(gl.k_max > reach)) {
        throw ConfigError("grid extent must exceed 1/min(c1, c2)");
    }

    const std::size_t nk = gk.n, nl = gl.n;
    const double rho1 = tp.r1 + tp.delta, rho2 = tp.r2 + tp.delta;
    std::vector<double> fu, fv;
    detail::pair_payoffs(tp, gk, gl, 1.0, 1.0, fu, fv);

    ValueFunctionPair uv;
    uv.grid_k = gk;
    uv.grid_l = gl;
    uv.u_values.resize(nk * nl);
    uv.v_values.resize(nk * nl);
    for (std::size_t s = 0; s < nk * nl; ++s) {
        uv.u_values[s] = fu[s] / rho1;
        uv.v_values[s] = fv[s] / rho2;
    }

    auto bk = [&](std::size_t i, std::size_t j) {
        return -tp.delta * gk.node(i) + tp.lam1 * uv.u_at(i, j);
    };
    auto bl = [&](std::size_t i, std::size_t j) {
        return -tp.delta * gl.node(j) + tp.lam2 * uv.v_at(i, j);
    };
    auto zero_rhs = [](std::size_t, std::size_t) { return 0.0; };

    double amax = 0.0;
    for (std::size_t j = 0; j < nl; ++j) {
        for (std::size_t i = 0; i < nk; ++i) {
            amax = std::max(amax, std::max(std::abs(bk(i, j)), std::abs(bl(i, j))));
        }
    }
    const double hk = gk.spacing(), hl = gl.spacing();
    double dtau = opt.cfl / (amax / hk + amax / hl + std::max(rho1, rho2) + 1e-300);
    double prev_res = std::numeric_limits<double>::infinity();

    std::vector<double> lower(nk), diag(nk), upper(nk), rhs(nk), scratch(nk);

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        const double idtau = 1.0 / dtau;
        const bool ascending = (iter % 2) != 0;
        detail::sweep_pair_slab(gk, gl, rho1, fu, idtau, 0.0, ascending, bk, bl,
                                zero_rhs, lower, diag, upper, rhs, scratch,
                                uv.u_values.data());
        detail::sweep_pair_slab(gk, gl, rho2, fv, idtau, 0.0, ascending, bk, bl,
                                zero_rhs, lower, diag, upper, rhs, scratch,
                                uv.v_values.data());

        const double rnorm = system_residual(tp, uv);
        if (stats) {
            stats->residual = rnorm;
            stats->iterations = iter;
        }
        if (rnorm <= opt.tol) {
            const double scale = amax + rho1 + rho2 + 1.0;
            for (std::size_t j = 0; j < nl; ++j) {
                if (bk(0, j) < -1e-10 * scale || bk(nk - 1, j) > 1e-10 * scale) {
                    throw SolverError(
                        "drift points outward at a K boundary; enlarge the grid");
                }
            }
            for (std::size_t i = 0; i < nk; ++i) {
                if (bl(i, 0) < -1e-10 * scale || bl(i, nl - 1) > 1e-10 * scale) {
                    throw SolverError(
                        "drift points outward at an L boundary; enlarge the grid");
                }
            }
            return uv;
        }
        if (rnorm < prev_res) {
            dtau = std::min(dtau * 2.0, 1e12);
        } else {
            dtau = std::max(dtau * 0.25, 1e-12);
        }
        prev_res = rnorm;
    }
    throw SolverError("solve_system: no convergence within max_iters (residual " +
                      std::to_string(stats ? stats->residual : -1.0) + ")");
}

// Stationary state of the pair dynamics.
struct StationaryPair {
    double x0 = 0.0;
    double y0 = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
};

// Damped fixed point z <- clamp(z + tau W(z)) on the interpolated drift field
// W(z) = (-delta x + lam1 U(z), -delta y + lam2 V(z)); the system
// monotonicity makes W a contraction direction, tau backtracks on any
// sup-norm increase. Components within snap distance of 0 land exactly on the
// boundary, matching the boundary equilibria of the continuous system.
inline StationaryPair stationary_state_2pop(const TwoPopParams& tp,
                                            const ValueFunctionPair& uv,
                                            double tol = 1e-9) {
    validate_2pop(tp);
    if (!(tol > 0.0)) throw ConfigError("stationary_state_2pop tol must be > 0");
    auto w1 = [&](double x, double y) { return -tp.delta * x + tp.lam1 * uv.u(x, y); };
    auto w2 = [&](double x, double y) { return -tp.delta * y + tp.lam2 * uv.v(x, y); };

    double x = 0.5 * uv.grid_k.k_max, y = 0.5 * uv.grid_l.k_max;
    double tau = 0.5 / tp.delta;
    double wx = w1(x, y), wy = w2(x, y);
    double wnorm = std::max(std::abs(wx), std::abs(wy));

    const std::size_t max_iters = 200000;
    for (std::size_t iter = 1; iter <= max_iters; ++iter) {
        if (wnorm <= tol) {
            StationaryPair sp;
            const double snap = 10.0 * tol / tp.delta;
            sp.x0 = (x < snap) ? 0.0 : x;
            sp.y0 = (y < snap) ? 0.0 : y;
            sp.residual = wnorm;
            sp.iterations = iter - 1;
            return sp;
        }
        const double xn = std::clamp(x + tau * wx, 0.0, uv.grid_k.k_max);
        const double yn = std::clamp(y + tau * wy, 0.0, uv.grid_l.k_max);
        const double wxn = w1(xn, yn), wyn = w2(xn, yn);
        const double wn = std::max(std::abs(wxn), std::abs(wyn));
        if (wn > wnorm && tau > 1e-8 / tp.delta) {
            tau *= 0.5;  // overshoot; retry from the same point
            continue;
        }
        x = xn; y = yn; wx = wxn; wy = wyn; wnorm = wn;
        tau = std::min(tau * 1.1, 0.9 / tp.delta);
    }
    throw SolverError("stationary_state_2pop: iteration failed to contract");
}

// Coupled capacity path of the two stocks.
struct PairPath {
    std::vector<double> times;
    std::vector<double> k;
    std::vector<double> l;
};

// Componentwise explicit Euler of dK = -delta K + lam1 U, dL = -delta L +
// lam2 V on the interpolated pair; same stepping contract as the 1D
// trajectory (clamp at 0, error on leaving the grid, final partial step).
inline PairPath simulate_2pop(const TwoPopParams& tp, const ValueFunctionPair& uv,
                              double k0, double l0, double horizon, double dt = 0.0) {
    validate_2pop(tp);
    if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
    if (k0 < 0.0 || k0 > uv.grid_k.k_max || l0 < 0.0 || l0 > uv.grid_l.k_max) {
        throw ConfigError("(k0, l0) must lie inside the solved grid");
    }
    if (dt <= 0.0) dt = 0.01 / tp.delta;

    PairPath path;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / dt));
    path.times.reserve(steps + 1);
    path.k.reserve(steps + 1);
    path.l.reserve(steps + 1);
    double t = 0.0, k = k0, l = l0;
    path.times.push_back(t);
    path.k.push_back(k);
    path.l.push_back(l);
    while (t < horizon) {
        const double step = std::min(dt, horizon - t);
        const double dk = -tp.delta * k + tp.lam1 * uv.u(k, l);
        const double dl = -tp.delta * l + tp.lam2 * uv.v(k, l);
        k += step * dk;
        l += step * dl;
        if (k < 0.0) k = 0.0;
        if (l < 0.0) l = 0.0;
        if (k > uv.grid_k.k_max || l > uv.grid_l.k_max) {
            throw SolverError("simulate_2pop: path exits the solved grid");
        }
        t += step;
        path.times.push_back(t);
        path.k.push_back(k);
        path.l.push_back(l);
    }
    return path;
}

// Stochastic two-country variant. The exchange rate h(p) multiplies the
// second population's reward; identity means h == 1, exponential_capped means
// h(p) = clamp(exp(p), 1/A, A) (bounded both ways, rates are invertible).
inline double exchange_rate(const PriceProcess& pp, double p) {
    if (pp.reward_kind == RewardKind::identity) return 1.0;
    return std::clamp(std::exp(p), 1.0 / pp.cap_a, pp.cap_a);
}

// The hardware-market friction of country 2 rescales with the exchange rate;
// the direction is genuinely ambiguous, so both forms are exposed.
enum class Lam2Adjust { multiply, divide };

inline double adjusted_lam2(const TwoPopParams& tp, Lam2Adjust adj, double h) {
    return adj == Lam2Adjust::multiply ? tp.lam2 * h : tp.lam2 / h;
}

// (U, V) on the (K, L, p) box; slab m (fixed price node) is contiguous.
struct NoisePairSolution {
    Grid1D grid_k;
    Grid1D grid_l;
    PGrid grid_p;
    std::vector<double> u_values;
    std::vector<double> v_values;

    std::size_t slab() const { return grid_k.n * grid_l.n; }
    double u_at(std::size_t i, std::size_t j, std::size_t m) const {
        return u_values[m * slab() + j * grid_k.n + i];
    }
    double v_at(std::size_t i, std::size_t j, std::size_t m) const {
        return v_values[m * slab() + j * grid_k.n + i];
    }

    // Deterministic-pair view of one price slab (values are copied).
    ValueFunctionPair slice_pair(std::size_t m) const {
        ValueFunctionPair uv;
        uv.grid_k = grid_k;
        uv.grid_l = grid_l;
        const std::size_t s = slab();
        uv.u_values.assign(u_values.begin() + m * s, u_values.begin() + (m + 1) * s);
        uv.v_values.assign(v_values.begin() + m * s, v_values.begin() + (m + 1) * s);
        return uv;
    }
};

// Per-price stationary pair Z*(p) = (K*(p), L*(p)).
struct TargetSurface {
    std::vector<double> p_nodes;
    std::vector<double> k_star;
    std::vector<double> l_star;
};

namespace detail {

inline void validate_noise_2pop(const PriceProcess& pp) {
    require_finite(pp.a, "PriceProcess.a");
    require_finite(pp.b, "PriceProcess.b");
    require_finite(pp.nu, "PriceProcess.nu");
    require_finite(pp.cap_a, "PriceProcess.cap_a");
    require_finite(pp.p_min, "PriceProcess.p_min");
    require_finite(pp.p_max, "PriceProcess.p_max");
    if (!(pp.nu > 0.0)) throw ConfigError("PriceProcess.nu must be > 0");
    if (!(pp.p_min < pp.p_max)) throw ConfigError("PriceProcess.p_min must be < p_max");
    if (!(pp.cap_a >= 1.0)) {
        throw ConfigError("PriceProcess.cap_a must be >= 1 for an exchange rate");
    }
}

}  // namespace detail

// Residual of the coupled stochastic system, sup over both equations.
inline double system_residual_noise(const TwoPopParams& tp, const PriceProcess& pp,
                                    Lam2Adjust adj, const NoisePairSolution& sol) {
    const Grid1D& gk = sol.grid_k;
    const Grid1D& gl = sol.grid_l;
    const std::size_t np = sol.grid_p.n, s = sol.slab();
    const double hp = sol.grid_p.spacing();
    const double dcoef = pp.nu / (hp * hp);
    double worst = 0.0;
    std::vector<double> fu, fv;
    for (std::size_t m = 0; m < np; ++m) {
        const double p = sol.grid_p.node(m);
        const double h = exchange_rate(pp, p);
        const double lam2h = adjusted_lam2(tp, adj, h);
        const double al = pp.alpha(p);
        detail::pair_payoffs(tp, gk, gl, h, h, fu, fv);
        auto bk = [&](std::size_t i, std::size_t j) {
            return -tp.delta * gk.node(i) + tp.lam1 * sol.u_at(i, j, m);
        };
        auto bl = [&](std::size_t i, std::size_t j) {
            return -tp.delta * gl.node(j) + lam2h * sol.v_at(i, j, m);
        };
        auto extra = [&](const std::vector<double>& vals) {
            return [&vals, &sol, m, np, al, hp, dcoef, s](std::size_t i, std::size_t j) {
                const std::size_t at = j * sol.grid_k.n + i;
                const double w = vals[m * s + at];
                double res = 0.0;
                if (al >= 0.0) {
                    if (m + 1 < np) res += al * (vals[(m + 1) * s + at] - w) / hp;
                } else if (m > 0) {
                    res += al * (w - vals[(m - 1) * s + at]) / hp;
                }
                const double left = (m > 0) ? vals[(m - 1) * s + at] : vals[(m + 1) * s + at];
                const double right =
                    (m + 1 < np) ? vals[(m + 1) * s + at] : vals[(m - 1) * s + at];
                res += dcoef * (left - 2.0 * w + right);
                return res;
            };
        };
        worst = std::max(worst, detail::pair_slab_residual(
                                    gk, gl, tp.r1 + tp.delta, fu, bk, bl,
                                    extra(sol.u_values), sol.u_values.data() + m * s));
        worst = std::max(worst, detail::pair_slab_residual(
                                    gk, gl, tp.r2 + tp.delta, fv, bk, bl,
                                    extra(sol.v_values), sol.v_values.data() + m * s));
    }
    return worst;
}

// Solves the stochastic two-country system slab by slab (alternating sweeps:
// each pseudo-time step relaxes every price slab once, price couplings lagged
// Gauss-Seidel style with the diagonal part implicit). Meant for coarse
// grids; the residual tolerance default is the relaxed 1e-6.
inline NoisePairSolution solve_2pop_noise(const TwoPopParams& tp, const PriceProcess& pp,
                                          Lam2Adjust adj, const Grid1D& gk,
                                          const Grid1D& gl, std::size_t np,
                                          const SolverOptions& opt = {.tol = 1e-6},
                                          SolveStats* stats = nullptr) {
    validate_2pop(tp);
    detail::validate_noise_2pop(pp);
    validate_grid(gk);
    validate_grid(gl);
    validate_options(opt);
    // The exchange rate is monotone in p, so its extremes sit at the bounds.
    const double hmax = std::max(exchange_rate(pp, pp.p_min), exchange_rate(pp, pp.p_max));
    const double reach = std::max(1.0 / tp.c1, hmax / tp.c2);
    if (!(gk.k_max > reach) || !(gl.k_max > reach)) {
        throw ConfigError("grid extent must exceed the widest profitable total");
    }

    NoisePairSolution sol;
    sol.grid_k = gk;
    sol.grid_l = gl;
    sol.grid_p = PGrid{pp.p_min, pp.p_max, np};
    validate_pgrid(sol.grid_p);

    const std::size_t nk = gk.n, nl = gl.n, s = nk * nl;
    const double rho1 = tp.r1 + tp.delta, rho2 = tp.r2 + tp.delta;
    const double hk = gk.spacing(), hl = gl.spacing(), hp = sol.grid_p.spacing();
    const double dcoef = pp.nu / (hp * hp);

    std::vector<std::vector<double>> fu(np), fv(np);
    std::vector<double> lam2h(np), alphas(np);
    for (std::size_t m = 0; m < np; ++m) {
        const double p = sol.grid_p.node(m);
        const double h = exchange_rate(pp, p);
        lam2h[m] = adjusted_lam2(tp, adj, h);
        alphas[m] = pp.alpha(p);
        detail::pair_payoffs(tp, gk, gl, h, h, fu[m], fv[m]);
    }

    sol.u_values.resize(np * s);
    sol.v_values.resize(np * s);
    for (std::size_t m = 0; m < np; ++m) {
        for (std::size_t q = 0; q < s; ++q) {
            sol.u_values[m * s + q] = fu[m][q] / rho1;
            sol.v_values[m * s + q] = fv[m][q] / rho2;
        }
    }

    double amax = 0.0, almax = 0.0;
    for (std::size_t m = 0; m < np; ++m) {
        almax = std::max(almax, std::abs(alphas[m]));
        for (std::size_t j = 0; j < nl; ++j) {
            for (std::size_t i = 0; i < nk; ++i) {
                amax = std::max(amax, std::abs(-tp.delta * gk.node(i) +
                                               tp.lam1 * sol.u_at(i, j, m)));
                amax = std::max(amax, std::abs(-tp.delta * gl.node(j) +
                                               lam2h[m] * sol.v_at(i, j, m)));
            }
        }
    }
    double dtau = opt.cfl / (amax / hk + amax / hl + almax / hp + 2.0 * dcoef +
                             std::max(rho1, rho2) + 1e-300);
    double prev_res = std::numeric_limits<double>::infinity();

    std::vector<double> lower(nk), diag(nk), upper(nk), rhs(nk), scratch(nk);

    for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
        const double idtau = 1.0 / dtau;
        const bool ascending = (iter % 2) != 0;
        for (std::size_t mm = 0; mm < np; ++mm) {
            const std::size_t m = ascending ? mm : np - 1 - mm;
            const double al = alphas[m];
            double pdiag = 2.0 * dcoef;
            double wlo = dcoef, whi = dcoef;
            if (m == 0) { wlo = 0.0; whi = 2.0 * dcoef; }
            if (m + 1 == np) { whi = 0.0; wlo = 2.0 * dcoef; }
            if (al >= 0.0) {
                if (m + 1 < np) { pdiag += al / hp; whi += al / hp; }
            } else {
                if (m > 0) { pdiag += -al / hp; wlo += -al / hp; }
            }
            auto extra_of = [&](const std::vector<double>& vals) {
                return [&vals, wlo, whi, m, s, nk](std::size_t i, std::size_t j) {
                    const std::size_t at = j * nk + i;
                    double nb = 0.0;
                    if (wlo != 0.0) nb += wlo * vals[(m - 1) * s + at];
                    if (whi != 0.0) nb += whi * vals[(m + 1) * s + at];
                    return nb;
                };
            };
            auto bk = [&](std::size_t i, std::size_t j) {
                return -tp.delta * gk.node(i) + tp.lam1 * sol.u_at(i, j, m);
            };
            auto bl = [&](std::size_t i, std::size_t j) {
                return -tp.delta * gl.node(j) + lam2h[m] * sol.v_at(i, j, m);
            };
            detail::sweep_pair_slab(gk, gl, rho1, fu[m], idtau, pdiag, ascending, bk,
                                    bl, extra_of(sol.u_values), lower, diag, upper,
                                    rhs, scratch, sol.u_values.data() + m * s);
            detail::sweep_pair_slab(gk, gl, rho2, fv[m], idtau, pdiag, ascending, bk,
                                    bl, extra_of(sol.v_values), lower, diag, upper,
                                    rhs, scratch, sol.v_values.data() + m * s);
        }

        const double rnorm = system_residual_noise(tp, pp, adj, sol);
        if (stats) {
            stats->residual = rnorm;
            stats->iterations = iter;
        }
        if (rnorm <= opt.tol) {
            const double scale = amax + almax + rho1 + rho2 + 1.0;
            for (std::size_t m = 0; m < np; ++m) {
                for (std::size_t j = 0; j < nl; ++j) {
                    if (tp.lam1 * sol.u_at(0, j, m) < -1e-10 * scale ||
                        -tp.delta * gk.k_max + tp.lam1 * sol.u_at(nk - 1, j, m) >
                            1e-10 * scale) {
                        throw SolverError(
                            "drift points outward at a K boundary; enlarge the grid");
                    }
                }
                for (std::size_t i = 0; i < nk; ++i) {
                    if (lam2h[m] * sol.v_at(i, 0, m) < -1e-10 * scale ||
                        -tp.delta * gl.k_max + lam2h[m] * sol.v_at(i, nl - 1, m) >
                            1e-10 * scale) {
                        throw SolverError(
                            "drift points outward at an L boundary; enlarge the grid");
                    }
                }
            }
            return sol;
        }
        if (rnorm < prev_res) {
            dtau = std::min(dtau * 2.0, 1e12);
        } else {
            dtau = std::max(dtau * 0.25, 1e-12);
        }
        prev_res = rnorm;
    }
    throw SolverError("solve_2pop_noise: no convergence within max_iters (residual " +
                      std::to_string(stats ? stats->residual : -1.0) + ")");
}

// Stationary pair per price slab via the deterministic root-finder with the
// slab's adjusted friction.
inline TargetSurface target_surface(const TwoPopParams& tp, const PriceProcess& pp,
                                    Lam2Adjust adj, const NoisePairSolution& sol,
                                    double tol = 1e-9) {
    TargetSurface ts;
    const std::size_t np = sol.grid_p.n;
    ts.p_nodes.resize(np);
    ts.k_star.resize(np);
    ts.l_star.resize(np);
    for (std::size_t m = 0; m < np; ++m) {
        const double p = sol.grid_p.node(m);
        TwoPopParams eff = tp;
        eff.lam2 = adjusted_lam2(tp, adj, exchange_rate(pp, p));
        const StationaryPair sp = stationary_state_2pop(eff, sol.slice_pair(m), tol);
        ts.p_nodes[m] = p;
        ts.k_star[m] = sp.x0;
        ts.l_star[m] = sp.y0;
    }
    return ts;
}

}  // namespace mfgpow
