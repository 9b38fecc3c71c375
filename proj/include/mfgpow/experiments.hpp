#pragma once

// Comparative statics of the stationary equilibrium: sweeps over the friction
// level lambda and the progress rate delta, a golden-section search for the
// progress rate maximising total miner value, and a small loader for
// historical hashrate series used as descriptive overlays. Sweep rows come
// from the closed form; an optional flag re-derives the stationary state from
// the PDE at sample points so the two routes can be compared.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/solver1d.hpp"

namespace mfgpow {

struct SweepResult {
    std::string parameter;                  // "lambda" or "delta"
    std::vector<double> values;             // strictly increasing sweep points
    std::vector<EquilibriumReport> reports;  // one per value, same order
    double pde_gap = 0.0;     // max |K*_pde - K*_closed| over checked points
    std::size_t pde_points = 0;  // number of PDE-checked points
};

struct SweepOptions {
    bool pde_check = false;       // cross-validate against the PDE solver
    std::size_t pde_samples = 10;  // points re-derived when pde_check is on
    std::size_t grid_n = 2001;     // PDE grid resolution per checked point
    SolverOptions solver{};
};

// Default figure ranges: lambda log-spaced, delta linear.
inline std::vector<double> default_lambda_values() {
    std::vector<double> v(41);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::pow(10.0, -1.0 + 2.0 * static_cast<double>(i) / 40.0);
    }
    v.front() = 0.1;
    v.back() = 10.0;
    return v;
}

inline std::vector<double> default_delta_values() {
    std::vector<double> v(40);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = 0.05 + (2.0 - 0.05) * static_cast<double>(i) / 39.0;
    }
    return v;
}

namespace detail {

inline void require_sweep_values(const std::vector<double>& vals) {
    if (vals.empty()) {
        throw ConfigError("sweep values must be non-empty");
    }
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (!std::isfinite(vals[i]) || !(vals[i] > 0.0)) {
            throw ConfigError("sweep values must be positive");
        }
        if (i > 0 && !(vals[i] > vals[i - 1])) {
            throw ConfigError("sweep values must be strictly increasing");
        }
    }
}

template <typename Setter>
SweepResult run_sweep(const ModelParams& p, const std::string& name,
                      const std::vector<double>& vals, Setter set,
                      const SweepOptions& opt) {
    require_sweep_values(vals);
    SweepResult out;
    out.parameter = name;
    out.values = vals;
    out.reports.reserve(vals.size());
    for (double v : vals) {
        ModelParams q = p;
        set(q, v);
        out.reports.push_back(stationary_report(q));
    }
    if (opt.pde_check && opt.pde_samples > 0) {
        const std::size_t m = std::min(opt.pde_samples, vals.size());
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t i =
                (m == 1) ? 0
                         : (j * (vals.size() - 1) + (m - 1) / 2) / (m - 1);
            ModelParams q = p;
            set(q, vals[i]);
            const Grid1D g = default_grid(q, opt.grid_n);
            const ValueFunction1D u = solve_master_1d(q, g, opt.solver);
            const double k_pde = stationary_state_numerical(q, u);
            out.pde_gap =
                std::max(out.pde_gap, std::abs(k_pde - out.reports[i].k_star));
            ++out.pde_points;
        }
    }
    return out;
}

}  // namespace detail

inline SweepResult sweep_lambda(const ModelParams& p,
                                const std::vector<double>& lambdas,
                                const SweepOptions& opt = {}) {
    return detail::run_sweep(
        p, "lambda", lambdas, [](ModelParams& q, double v) { q.lambda = v; },
        opt);
}

inline SweepResult sweep_delta(const ModelParams& p,
                               const std::vector<double>& deltas,
                               const SweepOptions& opt = {}) {
    return detail::run_sweep(
        p, "delta", deltas, [](ModelParams& q, double v) { q.delta = v; }, opt);
}

// Total stationary miner value as a function of the progress rate.
inline double stationary_profit(const ModelParams& p, double delta) {
    ModelParams q = p;
    q.delta = delta;
    const double k = stationary_state_closed_form(q);
    return delta * k * k / q.lambda;
}

// Golden-section maximiser of the stationary profit over [lo, hi]. The
// bracket must contain an interior maximum: the numerical derivative has to
// point inward at both ends, otherwise the search refuses to run rather than
// report an endpoint as a maximiser.
inline double argmax_profit_delta(const ModelParams& p, double lo, double hi,
                                  double tol = 1e-6) {
    {
        ModelParams q = p;
        q.delta = 1.0;  // swept coordinate, only the rest needs validating
        validate_params(q);
    }
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo > 0.0) || !(hi > lo)) {
        throw ConfigError("argmax_profit_delta: bracket must satisfy 0 < lo < hi");
    }
    if (!(tol > 0.0)) {
        throw ConfigError("argmax_profit_delta: tol must be > 0");
    }
    const double step = 1e-7 * (hi - lo);
    const double d_lo =
        stationary_profit(p, lo + step) - stationary_profit(p, lo);
    const double d_hi =
        stationary_profit(p, hi) - stationary_profit(p, hi - step);
    if (!(d_lo > 0.0) || !(d_hi < 0.0)) {
        throw SolverError("argmax_profit_delta: no interior maximum in bracket");
    }
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = stationary_profit(p, x1);
    double f2 = stationary_profit(p, x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = stationary_profit(p, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = stationary_profit(p, x1);
        }
    }
    return 0.5 * (a + b);
}

// Historical hashrate samples. Times are years since the first sample, the
// unit every model rate is quoted in.
struct HashrateSeries {
    std::vector<std::string> timestamps;  // ISO-8601, strictly increasing
    std::vector<double> times;            // years since the first sample
    std::vector<double> hashrate;         // hashes per second, > 0
};

namespace detail {

inline double parse_iso8601(const std::string& field, std::size_t line) {
    std::string s = field;
    if (!s.empty() && s.back() == 'Z') s.pop_back();
    std::tm tm = {};
    std::istringstream ss(s);
    ss >> std::get_time(&tm, s.size() > 10 ? "%Y-%m-%dT%H:%M:%S" : "%Y-%m-%d");
    bool ok = !ss.fail();
    if (ok) {
        ss.peek();
        ok = ss.eof();
    }
    if (!ok) {
        throw IoError("load_hashrate_csv: line " + std::to_string(line) +
                      ": malformed timestamp \"" + field + "\"");
    }
    tm.tm_isdst = 0;
    return static_cast<double>(timegm(&tm));
}

inline void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace detail

inline HashrateSeries load_hashrate_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_hashrate_csv: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("load_hashrate_csv: line 1: missing header");
    }
    detail::strip_cr(line);
    if (line != "timestamp,hashrate") {
        throw IoError(
            "load_hashrate_csv: line 1: expected header \"timestamp,hashrate\"");
    }
    HashrateSeries out;
    std::vector<double> epochs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw IoError("load_hashrate_csv: line " + std::to_string(lineno) +
                          ": expected two comma-separated fields");
        }
        const std::string stamp = line.substr(0, comma);
        const std::string rate = line.substr(comma + 1);
        const double epoch = detail::parse_iso8601(stamp, lineno);
        if (!epochs.empty() && !(epoch > epochs.back())) {
            throw IoError("load_hashrate_csv: line " + std::to_string(lineno) +
                          ": timestamps must be strictly increasing");
        }
        double value = 0.0;
        std::size_t used = 0;
        bool ok = true;
        try {
            value = std::stod(rate, &used);
        } catch (const std::exception&) {
            ok = false;
        }
        if (!ok || used != rate.size()) {
            throw IoError("load_hashrate_csv: line " + std::to_string(lineno) +
                          ": malformed hashrate \"" + rate + "\"");
        }
        if (!std::isfinite(value) || !(value > 0.0)) {
            throw IoError("load_hashrate_csv: line " + std::to_string(lineno) +
                          ": hashrate must be positive");
        }
        epochs.push_back(epoch);
        out.timestamps.push_back(stamp);
        out.hashrate.push_back(value);
    }
    constexpr double seconds_per_year = 365.25 * 86400.0;
    out.times.reserve(epochs.size());
    for (double e : epochs) {
        out.times.push_back((e - epochs.front()) / seconds_per_year);
    }
    return out;
}

// Nominal to real: each sample is discounted by the progress accumulated
// since the first sample.
inline HashrateSeries to_real_series(const HashrateSeries& series,
                                     double delta) {
    if (!std::isfinite(delta) || delta < 0.0) {
        throw ConfigError("to_real_series: delta must be finite and >= 0");
    }
    HashrateSeries out = series;
    for (std::size_t i = 0; i < out.hashrate.size(); ++i) {
        out.hashrate[i] *= std::exp(-delta * series.times[i]);
    }
    return out;
}

}  // namespace mfgpow
