#pragma once

// Final feasibility pass: phased rendezvous refinement of the dispatched
// transfers and one optional deep-space maneuver per mothership leg.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "dyson/astro/lambert.hpp"
#include "dyson/chain/refine.hpp"
#include "dyson/core/parallel.hpp"
#include "dyson/dispatch/dispatcher.hpp"
#include "dyson/lowthrust/shooting.hpp"
#include "dyson/search/nelder_mead.hpp"

namespace dyson {

// ---------------------------------------------------------------- rendezvous

struct RefinedTransfer {
    std::int64_t asteroid = 0;
    int station = 0;
    Epoch t0, tf;
    double m_f = 0.0;
    Vec6<double> lam0{};
    double dtf_guess = 0.0;  // refined tf minus interpolated tf (days)
    int iterations = 0;
};

/// Phased time-optimal rendezvous from an interpolated table entry. Throws
/// ConvergenceError when the shooting fails.
inline RefinedTransfer refine_rendezvous(const TransferOpportunity& o, const AsteroidRecord& ast, const RingConfig& ring,
                                         const lowthrust::ShootingOptions& opt = {},
                                         const Constants& c = default_constants()) {
    if (o.asteroid != ast.id) throw InputError("refine_rendezvous: opportunity belongs to another asteroid");
    const auto s = lowthrust::solve_time_optimal_rendezvous(ast.elements, o.t0, ring, o.station,
                                                            lowthrust::WarmStart{o.lam0, o.tf - o.t0}, opt, c);
    RefinedTransfer r;
    r.asteroid = ast.id;
    r.station = o.station;
    r.t0 = s.t0;
    r.tf = s.tf;
    r.lam0 = s.lam0;
    r.m_f = asteroid_mass(ast.m0, (s.tf - s.t0) * c.day, c);
    r.dtf_guess = s.tf - o.tf;
    r.iterations = s.iterations;
    log::debug("finalrefine: asteroid ", ast.id, " station ", o.station, " dtf ", r.dtf_guess, " d");
    return r;
}

struct RendezvousRefineReport {
    Assignment assignment;  // opportunities replaced by their refined values
    std::vector<RefinedTransfer> transfers;
    std::vector<std::int64_t> replaced;
    std::vector<std::int64_t> dropped;
    double max_abs_dtf = 0.0;
};

namespace finalrefine_detail {

inline bool fits(const Assignment& a, int station, std::int64_t id, double tf, double gap) {
    const std::size_t k = dispatch_detail::position_of(a, station);
    const auto [lo, hi] = station_window(a, k, gap, id);
    return tf >= lo && tf <= hi;
}

inline void set_opportunity(Assignment& a, int station, std::int64_t id, const RefinedTransfer& r) {
    for (auto& x : a.stations[static_cast<std::size_t>(station - 1)])
        if (x.asteroid == id) {
            x.opp.t0 = r.t0;
            x.opp.tf = r.tf;
            x.opp.m_f = r.m_f;
            x.opp.lam0 = r.lam0;
        }
}

inline void remove(Assignment& a, int station, std::int64_t id) {
    auto& v = a.stations[static_cast<std::size_t>(station - 1)];
    v.erase(std::remove_if(v.begin(), v.end(), [&](const Allocation& x) { return x.asteroid == id; }), v.end());
}

}  // namespace finalrefine_detail

/// Refines every allocated transfer. A transfer that fails to converge, or
/// whose refined arrival breaks the window or the station gap, is replaced
/// by the next later opportunity of the same (asteroid, station) cell that
/// refines and fits; otherwise the asteroid is dropped.
inline RendezvousRefineReport refine_assignment(const Assignment& in, const RendezvousTable& table, const Catalog& cat,
                                                const RingConfig& ring, const lowthrust::ShootingOptions& opt = {},
                                                unsigned jobs = 1, const Constants& c = default_constants()) {
    RendezvousRefineReport rep;
    rep.assignment = in;
    std::vector<Allocation> all;
    for (int s : in.order)
        for (const auto& x : in.stations[static_cast<std::size_t>(s - 1)]) all.push_back(x);
    std::vector<std::optional<RefinedTransfer>> first(all.size());
    parallel_for(all.size(), jobs, [&](std::size_t i) {
        try {
            first[i] = refine_rendezvous(all[i].opp, cat.at(all[i].asteroid), ring, opt, c);
        } catch (const Error&) {
        }
    });
    const double window_end = c.t_end_mjd();
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& x = all[i];
        const int s = x.opp.station;
        auto accept = [&](const RefinedTransfer& r) {
            return r.tf.mjd <= window_end && finalrefine_detail::fits(rep.assignment, s, x.asteroid, r.tf.mjd, c.station_gap_days);
        };
        std::optional<RefinedTransfer> got;
        if (first[i] && accept(*first[i])) got = first[i];
        bool replaced = false;
        if (!got) {
            for (const auto& o : table.cell(x.asteroid, s)) {
                if (!(o.t0 > x.opp.t0)) continue;
                try {
                    const auto r = refine_rendezvous(o, cat.at(x.asteroid), ring, opt, c);
                    if (accept(r)) {
                        got = r;
                        replaced = true;
                        break;
                    }
                } catch (const Error&) {
                }
            }
        }
        if (!got) {
            log::info("finalrefine: asteroid ", x.asteroid, " dropped from station ", s);
            finalrefine_detail::remove(rep.assignment, s, x.asteroid);
            rep.dropped.push_back(x.asteroid);
            continue;
        }
        if (replaced) {
            log::info("finalrefine: asteroid ", x.asteroid, " uses a later opportunity");
            rep.replaced.push_back(x.asteroid);
        }
        finalrefine_detail::set_opportunity(rep.assignment, s, x.asteroid, *got);
        if (!replaced) rep.max_abs_dtf = std::max(rep.max_abs_dtf, std::abs(got->dtf_guess));
        rep.transfers.push_back(*got);
    }
    for (auto& v : rep.assignment.stations)
        std::sort(v.begin(), v.end(), [](const Allocation& a, const Allocation& b) { return a.opp.tf < b.opp.tf; });
    return rep;
}

// ---------------------------------------------------------------------- DSM

/// Leg between two fixed encounters; the boundary costs give the impulse
/// needed at each end as a function of the leg's velocity there.
struct DsmLegProblem {
    Vec3 r_dep = Vec3::Zero(), r_arr = Vec3::Zero();  // km
    Epoch t_dep, t_arr;
    std::function<double(const Vec3&)> departure_cost;
    std::function<double(const Vec3&)> arrival_cost;
    double r_min = 0.0;  // km, perihelion floor for every conic arc
    double mu = default_constants().mu_sun;
};

struct DsmGuess {
    double x = 0.5;
    Vec3 r = Vec3::Zero();
};

struct DsmResult {
    double x = 0.5;
    Vec3 r_dsm = Vec3::Zero();
    double dv_total = INFINITY;  // departure + DSM + arrival
    double dv_dsm = 0.0;
    double single_arc = INFINITY;
    Vec3 v_dep = Vec3::Zero(), v_dsm_minus = Vec3::Zero(), v_dsm_plus = Vec3::Zero(), v_arr = Vec3::Zero();
    bool accepted = false;
};

struct DsmParams {
    double x_lo = 0.05, x_hi = 0.95;
    double box_au = 3.0;
    double min_gain = 1e-6;  // km/s
    NelderMeadParams nm{.max_evals = 1500, .x_tol = 1e-11, .f_tol = 1e-13};
    int restarts = 2;
};

namespace finalrefine_detail {

struct TwoArc {
    double cost = INFINITY;
    double dv_dsm = 0.0;
    Vec3 v_dep, v_m, v_p, v_arr;
};

inline TwoArc two_arc(const DsmLegProblem& p, double x, const Vec3& r) {
    TwoArc out;
    const double dt = (p.t_arr - p.t_dep) * 86400.0;
    const double t1 = x * dt, t2 = (1.0 - x) * dt;
    const auto a1 = lambert(p.r_dep, r, t1, p.mu);
    const auto a2 = lambert(r, p.r_arr, t2, p.mu);
    double violation = 0.0;
    violation += std::max(0.0, p.r_min - arc_min_radius(p.r_dep, a1.v1, t1, p.mu));
    violation += std::max(0.0, p.r_min - arc_min_radius(r, a2.v1, t2, p.mu));
    out.v_dep = a1.v1;
    out.v_m = a1.v2;
    out.v_p = a2.v1;
    out.v_arr = a2.v2;
    out.dv_dsm = (a2.v1 - a1.v2).norm();
    out.cost = p.departure_cost(a1.v1) + out.dv_dsm + p.arrival_cost(a2.v2);
    if (violation > 0.0) out.cost = 1e3 + violation / 1e6;  // outside the feasible set
    return out;
}

}  // namespace finalrefine_detail

/// Cost of the leg flown as one Lambert arc (infinite when infeasible).
inline double single_arc_cost(const DsmLegProblem& p, Vec3* v_dep = nullptr, Vec3* v_arr = nullptr) {
    try {
        const double dt = (p.t_arr - p.t_dep) * 86400.0;
        const auto a = lambert(p.r_dep, p.r_arr, dt, p.mu);
        if (arc_min_radius(p.r_dep, a.v1, dt, p.mu) < p.r_min) return INFINITY;
        if (v_dep) *v_dep = a.v1;
        if (v_arr) *v_arr = a.v2;
        return p.departure_cost(a.v1) + p.arrival_cost(a.v2);
    } catch (const Error&) {
        return INFINITY;
    }
}

/// Point on the single-arc leg at half its duration.
inline DsmGuess mid_leg_guess(const DsmLegProblem& p) {
    DsmGuess g;
    const double dt = (p.t_arr - p.t_dep) * 86400.0;
    try {
        const auto a = lambert(p.r_dep, p.r_arr, dt, p.mu);
        g.r = propagate_state(p.r_dep, a.v1, 0.5 * dt, p.mu).first;
    } catch (const Error&) {
        g.r = 0.5 * (p.r_dep + p.r_arr);
    }
    return g;
}

/// Local minimization of departure + DSM + arrival impulses over the DSM
/// time fraction and position. Accepted only when it beats the single arc.
inline DsmResult optimize_dsm_leg(const DsmLegProblem& p, const DsmGuess& guess, const DsmParams& prm = {},
                                  const Constants& c = default_constants()) {
    if (!(p.t_arr > p.t_dep)) throw InputError("optimize_dsm_leg: leg duration must be positive");
    DsmResult res;
    Vec3 v1s, v2s;
    res.single_arc = single_arc_cost(p, &v1s, &v2s);
    const double au = c.au;
    const SearchSpace space({prm.x_lo, -prm.box_au, -prm.box_au, -prm.box_au},
                            {prm.x_hi, prm.box_au, prm.box_au, prm.box_au});
    auto f = [&](const Point& q) {
        try {
            return finalrefine_detail::two_arc(p, q[0], Vec3(q[1], q[2], q[3]) * au).cost;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    Point x0{std::clamp(guess.x, prm.x_lo, prm.x_hi), guess.r.x() / au, guess.r.y() / au, guess.r.z() / au};
    space.repair(x0);
    SearchReport best = nelder_mead(f, space, x0, prm.nm);
    for (int k = 0; k < prm.restarts && !best.best_point.empty(); ++k) {
        auto nm = prm.nm;
        nm.initial_step *= std::pow(0.2, k + 1);
        const auto again = nelder_mead(f, space, best.best_point, nm);
        if (!(again.best_value < best.best_value)) break;
        best = again;
    }
    if (best.best_point.empty() || !std::isfinite(best.best_value)) return res;
    const Point& q = best.best_point;
    try {
        const auto t = finalrefine_detail::two_arc(p, q[0], Vec3(q[1], q[2], q[3]) * au);
        if (t.cost >= 1e3) return res;
        res.x = q[0];
        res.r_dsm = Vec3(q[1], q[2], q[3]) * au;
        res.dv_total = t.cost;
        res.dv_dsm = t.dv_dsm;
        res.v_dep = t.v_dep;
        res.v_dsm_minus = t.v_m;
        res.v_dsm_plus = t.v_p;
        res.v_arr = t.v_arr;
        res.accepted = t.cost < res.single_arc - prm.min_gain;
    } catch (const Error&) {
    }
    return res;
}

/// Encounter-by-encounter view of a chain: node 0 is Earth at launch, node
/// j the j-th flyby. Leg j joins node j and node j+1.
struct ChainFrame {
    std::vector<std::int64_t> ids;
    std::vector<Epoch> t;
    std::vector<Vec3> r, v;  // body states
    std::vector<Vec3> v_dep, v_arr;
    std::vector<std::optional<Dsm>> dsm;
    int ship = 1;

    std::size_t legs() const { return v_dep.size(); }
};

inline ChainFrame make_frame(const ChainGeometry& g, const MothershipChain& ch) {
    ChainFrame f;
    f.ship = ch.ship;
    const auto e = earth_state(ch.launch_epoch, g.earth, g.c);
    f.t.push_back(ch.launch_epoch);
    f.r.push_back(e.r);
    f.v.push_back(e.v);
    for (const auto& l : ch.legs) {
        const auto s = propagate_kepler(g.cat->at(l.target).elements, l.encounter, g.c);
        f.ids.push_back(l.target);
        f.t.push_back(l.encounter);
        f.r.push_back(s.r);
        f.v.push_back(s.v);
        f.v_dep.push_back(l.v_depart);
        f.v_arr.push_back(l.v_arrive);
        f.dsm.push_back(l.dsm);
    }
    return f;
}

/// Launch excess above the free cap; crossing the cap also carries a 1e3
/// penalty so the pass never turns a legal launch into an illegal one.
inline double launch_cost(const ChainFrame& f, const Vec3& v_plus, const Constants& c) {
    const double excess = (v_plus - f.v[0]).norm() - c.v_launch_max;
    return excess > 0.0 ? 1e3 + excess : 0.0;
}

/// Impulse at flyby node k (>= 1) given the arriving and (optional) leaving velocity.
inline FlybySplit node_split(const ChainFrame& f, std::size_t k, const Vec3& v_minus, const Vec3* v_plus, const Constants& c) {
    if (v_plus) return flyby_split_optimal(v_minus, f.v[k], *v_plus, c.v_flyby_max);
    FlybySplit s = flyby_split_greedy(v_minus, f.v[k], v_minus, c.v_flyby_max);
    s.dv2 = Vec3::Zero();
    return s;
}

inline MothershipChain frame_to_chain(const ChainFrame& f, const Constants& c) {
    MothershipChain ch;
    ch.ship = f.ship;
    ch.launch_epoch = f.t[0];
    if (f.legs() == 0) return ch;
    ch.launch_impulse = f.v_dep[0] - f.v[0];
    for (std::size_t j = 0; j < f.legs(); ++j) {
        ChainLeg l{};
        l.target = f.ids[j];
        l.encounter = f.t[j + 1];
        l.v_depart = f.v_dep[j];
        l.v_arrive = f.v_arr[j];
        l.dsm = f.dsm[j];
        const Vec3* vp = j + 1 < f.legs() ? &f.v_dep[j + 1] : nullptr;
        const auto s = node_split(f, j + 1, f.v_arr[j], vp, c);
        l.dv1 = s.dv1;
        l.dv2 = s.dv2;
        ch.legs.push_back(l);
    }
    return ch;
}

/// Leg j's problem with the neighbouring legs held fixed.
inline DsmLegProblem leg_problem(const ChainFrame& f, std::size_t j, const Constants& c) {
    DsmLegProblem p;
    p.r_dep = f.r[j];
    p.r_arr = f.r[j + 1];
    p.t_dep = f.t[j];
    p.t_arr = f.t[j + 1];
    p.mu = c.mu_sun;
    p.r_min = c.r_min_au * c.au;
    if (j == 0) {
        p.departure_cost = [&f, &c](const Vec3& v) { return launch_cost(f, v, c); };
    } else {
        const Vec3 vm = f.v_arr[j - 1];
        p.departure_cost = [&f, &c, j, vm](const Vec3& v) { return node_split(f, j, vm, &v, c).cost(); };
    }
    if (j + 1 < f.legs()) {
        const Vec3 vp = f.v_dep[j + 1];
        p.arrival_cost = [&f, &c, j, vp](const Vec3& v) { return node_split(f, j + 1, v, &vp, c).cost(); };
    } else {
        p.arrival_cost = [&f, &c, j](const Vec3& v) { return node_split(f, j + 1, v, nullptr, c).cost(); };
    }
    return p;
}

/// Current cost attributable to leg j (its end impulses and its DSM).
inline double leg_cost(const ChainFrame& f, std::size_t j, const Constants& c) {
    const auto p = leg_problem(f, j, c);
    return p.departure_cost(f.v_dep[j]) + p.arrival_cost(f.v_arr[j]) + (f.dsm[j] ? f.dsm[j]->dv.norm() : 0.0);
}

struct DsmPassReport {
    std::vector<MothershipChain> chains;
    std::vector<double> dv_before, dv_after;
    std::vector<std::int64_t> dropped;  // unassigned flybys replaced by a DSM
    int dsm_count = 0;
};

namespace finalrefine_detail {

inline void apply(ChainFrame& f, std::size_t j, const DsmResult& r, const DsmLegProblem& p) {
    f.v_dep[j] = r.v_dep;
    f.v_arr[j] = r.v_arr;
    Dsm d;
    d.epoch = p.t_dep + r.x * (p.t_arr - p.t_dep);
    d.r = r.r_dsm;
    d.dv = r.v_dsm_plus - r.v_dsm_minus;
    f.dsm[j] = d;
}

/// Replaces flyby node k by a DSM on the merged leg k-1 -> k+1 when that is
/// no more expensive than visiting it.
inline bool try_skip(ChainFrame& f, std::size_t k, const DsmParams& prm, const Constants& c) {
    const std::size_t j = k - 1;  // leg into node k
    if (k == 0 || k + 1 >= f.t.size() || f.dsm[j] || f.dsm[k]) return false;
    ChainFrame m = f;
    const double before = leg_cost(f, j, c) + leg_cost(f, k, c) - node_split(f, k, f.v_arr[j], &f.v_dep[k], c).cost();
    m.ids.erase(m.ids.begin() + static_cast<long>(j));
    m.t.erase(m.t.begin() + static_cast<long>(k));
    m.r.erase(m.r.begin() + static_cast<long>(k));
    m.v.erase(m.v.begin() + static_cast<long>(k));
    m.v_dep.erase(m.v_dep.begin() + static_cast<long>(k));
    m.v_arr.erase(m.v_arr.begin() + static_cast<long>(j));
    m.dsm.erase(m.dsm.begin() + static_cast<long>(k));
    const auto p = leg_problem(m, j, c);
    DsmGuess g;
    g.x = (f.t[k] - f.t[j]) / (f.t[k + 1] - f.t[j]);
    g.r = f.r[k];
    auto r = optimize_dsm_leg(p, g, prm, c);
    // The merged leg either keeps the DSM or, if cheaper, flies as one arc.
    Vec3 v1, v2;
    const double single = single_arc_cost(p, &v1, &v2);
    const double merged = std::min(r.dv_total, single);
    if (!(merged <= before + 1e-12)) return false;
    if (r.dv_total <= single) {
        apply(m, j, r, p);
    } else {
        m.v_dep[j] = v1;
        m.v_arr[j] = v2;
    }
    f = std::move(m);
    return true;
}

}  // namespace finalrefine_detail

/// Drops unassigned interior flybys in favour of a DSM, offers a DSM on every
/// remaining leg (mid-leg guess), and re-splits the flybys. Encounter epochs
/// never move and no chain gets more expensive.
inline DsmPassReport apply_dsm_pass(const ChainGeometry& g, const std::vector<MothershipChain>& chains,
                                    const std::set<std::int64_t>& assigned, const DsmParams& prm = {},
                                    unsigned jobs = 1) {
    const Constants& c = g.c;
    DsmPassReport rep;
    rep.chains.resize(chains.size());
    std::vector<std::vector<std::int64_t>> dropped(chains.size());
    std::vector<int> count(chains.size(), 0);
    parallel_for(chains.size(), jobs, [&](std::size_t i) {
        ChainFrame f = make_frame(g, chains[i]);
        // Unassigned interior flybys first; each merged leg can host one DSM.
        for (std::size_t k = 1; k + 1 < f.t.size();) {
            const std::int64_t id = f.ids[k - 1];
            if (!assigned.count(id) && finalrefine_detail::try_skip(f, k, prm, c)) {
                dropped[i].push_back(id);
                continue;
            }
            ++k;
        }
        for (std::size_t j = 0; j < f.legs(); ++j) {
            if (f.dsm[j]) continue;
            const auto p = leg_problem(f, j, c);
            const double now = leg_cost(f, j, c);
            const auto r = optimize_dsm_leg(p, mid_leg_guess(p), prm, c);
            if (r.accepted && r.dv_total < now - prm.min_gain) finalrefine_detail::apply(f, j, r, p);
        }
        MothershipChain out = frame_to_chain(f, c);
        if (chain_dv(out, c) > chain_dv(chains[i], c)) {
            out = chains[i];
            dropped[i].clear();
        }
        for (const auto& l : out.legs) count[i] += l.dsm ? 1 : 0;
        rep.chains[i] = std::move(out);
    });
    for (std::size_t i = 0; i < chains.size(); ++i) {
        rep.dv_before.push_back(chain_dv(chains[i], c));
        rep.dv_after.push_back(chain_dv(rep.chains[i], c));
        rep.dropped.insert(rep.dropped.end(), dropped[i].begin(), dropped[i].end());
        rep.dsm_count += count[i];
    }
    return rep;
}

}  // namespace dyson
