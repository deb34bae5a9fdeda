#pragma once

// Exhaustive enumeration of the chain tree for tiny catalogs.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dyson/chain/beam.hpp"

namespace dyson::oracle {

inline SynthRanges near_earth() {
    return SynthRanges{.a_lo = 0.95, .a_hi = 1.2, .e_lo = 0, .e_hi = 0.05, .i_lo = 0, .i_hi = 2 * kDeg, .m_lo = 1e14, .m_hi = 1e15};
}

// Exhaustive enumeration of the chain tree with the same pruning rules,
// computed independently of expand_level.
struct Exhaustive {
    inline static const Constants& C = default_constants();
    const Catalog& cat;
    RingConfig ring;
    PruningRules rules;
    double dt_e2a;
    std::vector<double> dts;
    double best = 0.0;
    std::size_t nodes = 0;

    double mass_of(std::size_t j) const {
        const auto& el = cat[j].elements;
        const double v0 = std::sqrt(C.mu_sun / (el.a * C.au)), v1 = std::sqrt(C.mu_sun / (ring.a_D * C.au));
        const double dv = std::sqrt(v0 * v0 - 2 * v0 * v1 * std::cos(M_PI / 2 * el.i) + v1 * v1);
        const double tof = dv / 1e-7;
        return std::max(0.0, cat[j].m0 * (1 - 6e-9 * tof));
    }
    double tof_days(std::size_t j) const {
        const auto& el = cat[j].elements;
        const double v0 = std::sqrt(C.mu_sun / (el.a * C.au)), v1 = std::sqrt(C.mu_sun / (ring.a_D * C.au));
        return std::sqrt(v0 * v0 - 2 * v0 * v1 * std::cos(M_PI / 2 * el.i) + v1 * v1) / 1e-7 / 86400.0;
    }

    void dfs(std::vector<int>& seq, Epoch t, Vec3 r, Vec3 v_in, double dv, double mass, bool root) {
        for (double dt : root ? std::vector<double>{dt_e2a} : dts) {
            const Epoch t1 = t + dt;
            if (t1.mjd > C.t_end_mjd()) continue;
            for (std::size_t j = 0; j < cat.size(); ++j) {
                if (std::find(seq.begin(), seq.end(), int(j)) != seq.end()) continue;
                if (t1.mjd + 30 + tof_days(j) > C.t_end_mjd()) continue;
                const auto s = propagate_kepler(cat[j].elements, t1);
                LambertSolution sol;
                try {
                    sol = lambert(r, s.r, dt * C.day, C.mu_sun);
                } catch (const Error&) {
                    continue;
                }
                const double dep = (sol.v1 - v_in).norm();
                if (root && dep > rules.v_launch_max) continue;
                const double rel = (s.v - sol.v2).norm();
                const double arr = std::max(0.0, rel - 2.0);
                const double leg = (root ? 0.0 : dep) + arr;
                if (leg > rules.dv_a2a_max || dv + leg > rules.dv_total_max) continue;
                if (arc_min_radius(r, sol.v1, dt * C.day, C.mu_sun) < 0.4 * C.au) continue;
                const Vec3 u = rel > 2.0 ? Vec3(s.v + (sol.v2 - s.v) * (2.0 / rel)) : sol.v2;
                const double m = mass + mass_of(j);
                const double q = 1 + (dv + leg) / 50;
                best = std::max(best, 1e-10 * m / (ring.a_D * ring.a_D * q * q));
                ++nodes;
                seq.push_back(int(j));
                dfs(seq, t1, s.r, u, dv + leg, m, false);
                seq.pop_back();
            }
        }
    }
};
}  // namespace dyson::oracle
