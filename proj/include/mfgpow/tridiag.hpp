#pragma once

// Small shared numerics: Thomas solve for tridiagonal systems and norms.
// The relaxation solvers assemble strictly diagonally dominant M-matrices,
// so no pivoting is needed.

#include <cmath>
#include <cstddef>
#include <vector>

namespace mfgpow {

// Solves the tridiagonal system in place:
//   lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i]
// lower[0] and upper[n-1] are ignored. `scratch` must have size n.
inline void thomas_solve(const std::vector<double>& lower,
                         const std::vector<double>& diag,
                         const std::vector<double>& upper,
                         std::vector<double>& rhs,
                         std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    scratch[0] = upper[0] / diag[0];
    rhs[0] = rhs[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = 1.0 / (diag[i] - lower[i] * scratch[i - 1]);
        scratch[i] = upper[i] * m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) * m;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace mfgpow
