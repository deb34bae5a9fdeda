#pragma once

// Post-processing of fixed asteroid sequences: encounter-epoch and ring
// refinement, and optimal flyby impulse splitting.

#include <vector>

#include "dyson/chain/beam.hpp"
#include "dyson/chain/flyby.hpp"
#include "dyson/search/nelder_mead.hpp"
#include "dyson/search/searchkit.hpp"

namespace dyson {

enum class SplitMode { greedy, optimal };

struct ChainGeometry {
    const Catalog* cat = nullptr;
    EarthModel earth{};
    Constants c = default_constants();
};

/// Rebuilds a chain through `ids` at `epochs` with single Lambert legs.
/// Throws InfeasibleError when a leg has no solution.
inline MothershipChain assemble_chain(const ChainGeometry& g, Epoch launch, const std::vector<std::int64_t>& ids,
                                      const std::vector<Epoch>& epochs, SplitMode mode = SplitMode::greedy, int ship = 1) {
    if (ids.size() != epochs.size()) throw InputError("assemble_chain: ids and epochs differ in length");
    MothershipChain ch;
    ch.ship = ship;
    ch.launch_epoch = launch;
    const auto e = earth_state(launch, g.earth, g.c);
    Vec3 r0 = e.r;
    Epoch t0 = launch;
    std::vector<Vec3> vA;
    for (std::size_t j = 0; j < ids.size(); ++j) {
        const double dt = epochs[j] - t0;
        if (!(dt > 0.0)) throw InfeasibleError("assemble_chain: epochs not increasing");
        const auto s = propagate_kepler(g.cat->at(ids[j]).elements, epochs[j], g.c);
        const auto sol = lambert(r0, s.r, dt * g.c.day, g.c.mu_sun);
        ChainLeg l{};
        l.target = ids[j];
        l.encounter = epochs[j];
        l.v_depart = sol.v1;
        l.v_arrive = sol.v2;
        ch.legs.push_back(l);
        vA.push_back(s.v);
        r0 = s.r;
        t0 = epochs[j];
    }
    if (ch.legs.empty()) return ch;
    ch.launch_impulse = ch.legs.front().v_depart - e.v;
    for (std::size_t j = 0; j < ch.legs.size(); ++j) {
        auto& l = ch.legs[j];
        if (j + 1 < ch.legs.size()) {
            const Vec3& vp = ch.legs[j + 1].v_depart;
            const FlybySplit sp = mode == SplitMode::greedy ? flyby_split_greedy(l.v_arrive, vA[j], vp, g.c.v_flyby_max)
                                                            : flyby_split_optimal(l.v_arrive, vA[j], vp, g.c.v_flyby_max);
            l.dv1 = sp.dv1;
            l.dv2 = sp.dv2;
        } else {
            l.dv1 = flyby_split_greedy(l.v_arrive, vA[j], l.v_arrive, g.c.v_flyby_max).dv1;
            l.dv2 = Vec3::Zero();
        }
    }
    return ch;
}

/// Smallest perihelion over the chain's conic arcs (km).
inline double chain_min_radius(const ChainGeometry& g, const MothershipChain& ch) {
    double rmin = std::numeric_limits<double>::infinity();
    Vec3 r0 = earth_state(ch.launch_epoch, g.earth, g.c).r;
    Epoch t0 = ch.launch_epoch;
    for (const auto& l : ch.legs) {
        const Vec3 rt = propagate_kepler(g.cat->at(l.target).elements, l.encounter, g.c).r;
        if (l.dsm) {
            const double t1 = (l.dsm->epoch - t0) * g.c.day;
            rmin = std::min(rmin, arc_min_radius(r0, l.v_depart, t1, g.c.mu_sun));
            const auto [rd, vd] = propagate_state(r0, l.v_depart, t1, g.c.mu_sun);
            rmin = std::min(rmin, arc_min_radius(rd, vd + l.dsm->dv, (l.encounter - l.dsm->epoch) * g.c.day, g.c.mu_sun));
        } else {
            rmin = std::min(rmin, arc_min_radius(r0, l.v_depart, (l.encounter - t0) * g.c.day, g.c.mu_sun));
        }
        r0 = rt;
        t0 = l.encounter;
    }
    return rmin;
}

struct EpochRefineParams {
    double box_days = 30.0;
    double min_separation_days = 1.0;
    PsoParams pso{.swarm = 30, .iters = 100, .stall_limit = 25};
};

struct RefineOutcome {
    MothershipChain chain;
    bool improved = false;
    bool feasible = true;
};

/// R1: moves encounter epochs inside a box to lower the chain cost with the
/// asteroid sequence, launch epoch and ring held fixed.
inline RefineOutcome refine_epochs(const ChainGeometry& g, const MothershipChain& in, const RingEstimate& est,
                                   const EpochRefineParams& p = {}) {
    RefineOutcome out{in, false, true};
    const std::size_t n = in.legs.size();
    if (n == 0) return out;
    const auto ids = in.ids();
    const auto t_in = in.epochs();
    const double t_end = g.c.t_end_mjd();
    std::vector<double> lo(n), hi(n);
    std::vector<double> ast_tof(n);
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = t_in[j].mjd - p.box_days;
        hi[j] = t_in[j].mjd + p.box_days;
        ast_tof[j] = est.tof_days[g.cat->index_of(ids[j])];
    }
    const double base_cost = chain_dv(in, g.c);
    auto cost = [&](const Point& x) -> double {
        double viol = 0.0;
        double prev = in.launch_epoch.mjd;
        for (std::size_t j = 0; j < n; ++j) {
            viol += std::max(0.0, prev + p.min_separation_days - x[j]);
            viol += std::max(0.0, x[j] + g.c.atd_delay_days + ast_tof[j] - t_end);
            prev = x[j];
        }
        if (viol > 0.0) return 1e6 + viol;
        std::vector<Epoch> ep(n);
        for (std::size_t j = 0; j < n; ++j) ep[j] = Epoch(x[j]);
        try {
            const auto ch = assemble_chain(g, in.launch_epoch, ids, ep, SplitMode::greedy, in.ship);
            double pen = 0.0;
            const double launch = ch.launch_impulse.norm();
            if (launch > g.c.v_launch_max) pen += 1e3 + launch - g.c.v_launch_max;
            const double rmin = chain_min_radius(g, ch);
            if (rmin < g.c.r_min_au * g.c.au) pen += 1e3 + (g.c.r_min_au * g.c.au - rmin) / g.c.au;
            return chain_dv(ch, g.c) + pen;
        } catch (const Error&) {
            return 1e6;
        }
    };
    PsoParams pso = p.pso;
    Point x0(n);
    for (std::size_t j = 0; j < n; ++j) x0[j] = t_in[j].mjd;
    pso.initial = {x0};
    const SearchSpace space(lo, hi);
    const auto rep = pso_minimize(cost, space, pso);
    if (!(rep.best_value < 1e3)) {
        out.feasible = false;
        return out;
    }
    std::vector<Epoch> ep(n);
    for (std::size_t j = 0; j < n; ++j) ep[j] = Epoch(rep.best_point[j]);
    auto ch = assemble_chain(g, in.launch_epoch, ids, ep, SplitMode::greedy, in.ship);
    if (chain_dv(ch, g.c) < base_cost) {
        out.chain = std::move(ch);
        out.improved = true;
    }
    return out;
}

struct RingBounds {
    double a_lo = 0.65, a_hi = 2.0;
    double i_lo = 0.0, i_hi = 10.0 * kDeg;
    double raan_lo = 0.0, raan_hi = kTwoPi;
};

/// Campaign objective for fixed chains under a candidate ring.
inline double ring_objective(const Catalog& cat, const std::vector<MothershipChain>& chains, const RingConfig& ring,
                             const Constants& c = default_constants()) {
    double m = 0.0, den = 0.0;
    for (const auto& ch : chains) {
        for (const auto& l : ch.legs) {
            const auto& el = cat.at(l.target).elements;
            const auto e = edelbaum(el.a, ring.a_D, plane_angle(el.i, el.raan, ring.i_D, ring.raan_D), c);
            const double k = 1.0 - c.alpha * e.tof;
            if (k > 0.0) m += cat.at(l.target).m0 * k;
        }
        const double q = 1.0 + chain_dv(ch, c) / 50.0;
        den += q * q;
    }
    return den > 0.0 ? 1e-10 * m / (ring.a_D * ring.a_D * den) : 0.0;
}

/// Maximizes the campaign objective over (a_D, i_D, raan_D), PSO then a
/// Nelder-Mead polish.
inline RingConfig refine_ring(const Catalog& cat, const std::vector<MothershipChain>& chains, const RingConfig& ring0,
                              const PsoParams& pso_in, RingBounds b = {}, const Constants& c = default_constants()) {
    b.a_lo = std::max(b.a_lo, c.a_d_min_au);
    b.a_hi = std::max(b.a_hi, b.a_lo);
    const SearchSpace space({b.a_lo, b.i_lo, b.raan_lo}, {b.a_hi, b.i_hi, b.raan_hi});
    auto make = [&](const Point& x) {
        RingConfig r = ring0;
        r.a_D = x[0];
        r.i_D = x[1];
        r.raan_D = x[2];
        return r;
    };
    auto f = [&](const Point& x) { return -ring_objective(cat, chains, make(x), c); };
    PsoParams pso = pso_in;
    Point x0{std::clamp(ring0.a_D, b.a_lo, b.a_hi), std::clamp(ring0.i_D, b.i_lo, b.i_hi),
             std::clamp(ring0.raan_D, b.raan_lo, b.raan_hi)};
    pso.initial.insert(pso.initial.begin(), x0);
    const auto rep = pso_minimize(f, space, pso);
    const auto pol = nelder_mead(f, space, rep.best_point, {.max_evals = 600});
    const Point& best = pol.best_value < rep.best_value ? pol.best_point : rep.best_point;
    if (f(best) < f(x0)) return make(best);
    return make(x0);
}

/// R2: optimal re-split at every interior encounter; never increases cost.
inline MothershipChain apply_r2(const ChainGeometry& g, const MothershipChain& in) {
    MothershipChain ch = in;
    for (std::size_t j = 0; j + 1 < ch.legs.size(); ++j) {
        auto& l = ch.legs[j];
        const Vec3 vA = propagate_kepler(g.cat->at(l.target).elements, l.encounter, g.c).v;
        const FlybySplit sp = flyby_split_optimal(l.v_arrive, vA, ch.legs[j + 1].v_depart, g.c.v_flyby_max);
        if (sp.cost() < l.dv1.norm() + l.dv2.norm()) {
            l.dv1 = sp.dv1;
            l.dv2 = sp.dv2;
        }
    }
    return ch;
}

}  // namespace dyson
