#pragma once

// Plot-ready CSV exports for every solution shape the solvers produce. All
// floating-point fields are serialized with 17 significant digits so repeated
// runs of a deterministic computation produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mfgpow/common_noise.hpp"
#include "mfgpow/errors.hpp"
#include "mfgpow/experiments.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/obstacle.hpp"
#include "mfgpow/potential.hpp"
#include "mfgpow/solver1d.hpp"
#include "mfgpow/two_pop.hpp"

namespace mfgpow {

namespace detail {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open for writing: " + path);
    }
    return out;
}

inline void finish_csv(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

}  // namespace detail

inline void write_value_csv(const std::string& path, const ValueFunction1D& u) {
    auto out = detail::open_csv(path);
    out << "K,U\n";
    for (std::size_t i = 0; i < u.grid.n; ++i) {
        out << detail::fmt17(u.grid.node(i)) << ','
            << detail::fmt17(u.values[i]) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<double>& times,
                                 const std::vector<double>& k) {
    if (times.size() != k.size()) {
        throw ConfigError("write_trajectory_csv: times and values differ in length");
    }
    auto out = detail::open_csv(path);
    out << "t,K\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        out << detail::fmt17(times[i]) << ',' << detail::fmt17(k[i]) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_value2d_csv(const std::string& path, const ValueFunction2D& u) {
    auto out = detail::open_csv(path);
    out << "K,p,U\n";
    for (std::size_t j = 0; j < u.grid_p.n; ++j) {
        for (std::size_t i = 0; i < u.grid_k.n; ++i) {
            out << detail::fmt17(u.grid_k.node(i)) << ','
                << detail::fmt17(u.grid_p.node(j)) << ','
                << detail::fmt17(u.at(i, j)) << '\n';
        }
    }
    detail::finish_csv(out, path);
}

inline void write_target_curve_csv(const std::string& path, const TargetCurve& tc) {
    auto out = detail::open_csv(path);
    out << "p,k_star\n";
    for (std::size_t j = 0; j < tc.p_nodes.size(); ++j) {
        out << detail::fmt17(tc.p_nodes[j]) << ','
            << detail::fmt17(tc.k_star[j]) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_sde_path_csv(const std::string& path, const SdePath& sp) {
    auto out = detail::open_csv(path);
    out << "t,K,p\n";
    for (std::size_t i = 0; i < sp.times.size(); ++i) {
        out << detail::fmt17(sp.times[i]) << ',' << detail::fmt17(sp.k[i])
            << ',' << detail::fmt17(sp.p[i]) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_pair_csv(const std::string& path, const ValueFunctionPair& uv) {
    auto out = detail::open_csv(path);
    out << "K,L,U,V\n";
    for (std::size_t j = 0; j < uv.grid_l.n; ++j) {
        for (std::size_t i = 0; i < uv.grid_k.n; ++i) {
            out << detail::fmt17(uv.grid_k.node(i)) << ','
                << detail::fmt17(uv.grid_l.node(j)) << ','
                << detail::fmt17(uv.u_at(i, j)) << ','
                << detail::fmt17(uv.v_at(i, j)) << '\n';
        }
    }
    detail::finish_csv(out, path);
}

inline void write_pair_path_csv(const std::string& path, const PairPath& pp) {
    auto out = detail::open_csv(path);
    out << "t,K,L\n";
    for (std::size_t i = 0; i < pp.times.size(); ++i) {
        out << detail::fmt17(pp.times[i]) << ',' << detail::fmt17(pp.k[i])
            << ',' << detail::fmt17(pp.l[i]) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_sweep_csv(const std::string& path, const SweepResult& s) {
    auto out = detail::open_csv(path);
    out << "param,k_star,u_star,pi_star\n";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        out << detail::fmt17(s.values[i]) << ','
            << detail::fmt17(s.reports[i].k_star) << ','
            << detail::fmt17(s.reports[i].u_star) << ','
            << detail::fmt17(s.reports[i].pi_star) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_convergence_csv(const std::string& path,
                                  const std::vector<PenalizedRow>& rows) {
    auto out = detail::open_csv(path);
    out << "eta,k_star_eta,sup_gap\n";
    for (const PenalizedRow& r : rows) {
        out << detail::fmt17(r.eta) << ',' << detail::fmt17(r.k_star_eta)
            << ',' << detail::fmt17(r.sup_gap) << '\n';
    }
    detail::finish_csv(out, path);
}

// Planner value next to the unit value: the dphi column is the centered
// difference (one-sided at the ends) and gap = |dphi - U|.
inline void write_potential_csv(const std::string& path,
                                const PotentialSolution& s,
                                const ValueFunction1D& u) {
    if (s.grid.k_max != u.grid.k_max || s.grid.n != u.grid.n) {
        throw ConfigError("write_potential_csv: solutions use different grids");
    }
    const double h = s.grid.spacing();
    auto slope = [&](std::size_t i) {
        if (i == 0) return (s.phi_values[1] - s.phi_values[0]) / h;
        if (i + 1 == s.grid.n)
            return (s.phi_values[i] - s.phi_values[i - 1]) / h;
        return (s.phi_values[i + 1] - s.phi_values[i - 1]) / (2.0 * h);
    };
    auto out = detail::open_csv(path);
    out << "K,phi,dphi,U,gap\n";
    for (std::size_t i = 0; i < s.grid.n; ++i) {
        const double d = slope(i);
        out << detail::fmt17(s.grid.node(i)) << ','
            << detail::fmt17(s.phi_values[i]) << ',' << detail::fmt17(d)
            << ',' << detail::fmt17(u.values[i]) << ','
            << detail::fmt17(std::abs(d - u.values[i])) << '\n';
    }
    detail::finish_csv(out, path);
}

inline void write_hashrate_csv(const std::string& path, const HashrateSeries& s) {
    auto out = detail::open_csv(path);
    out << "timestamp,hashrate\n";
    for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
        out << s.timestamps[i] << ',' << detail::fmt17(s.hashrate[i]) << '\n';
    }
    detail::finish_csv(out, path);
}

}  // namespace mfgpow
