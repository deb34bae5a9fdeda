#pragma once

// Mothership chain construction: beam search over Lambert legs between
// catalog asteroids, campaign assembly and the outer transcription GA.

#include <algorithm>
#include <map>
#include <mutex>
#include <vector>

#include "dyson/astro/lambert.hpp"
#include "dyson/astro/ring.hpp"
#include "dyson/astro/transfer.hpp"
#include "dyson/catalog/catalog.hpp"
#include "dyson/chain/flyby.hpp"
#include "dyson/chain/model.hpp"
#include "dyson/core/log.hpp"
#include "dyson/core/parallel.hpp"
#include "dyson/search/searchkit.hpp"

namespace dyson {

struct TranscriptionParams {
    double dt_e2a = 349.0;  // days
    double dt_a2a = 180.0;  // days
    double a_D = 1.11;      // AU
};

struct PruningRules {
    double dv_a2a_max = 1.5;   // km/s, per leg
    double dv_total_max = 30;  // km/s, launch excluded
    double v_launch_max = 6;   // km/s
    bool perihelion_guard = true;
    bool window_guard = true;
};

struct ChainNode {
    std::vector<std::int64_t> visited;
    std::vector<Epoch> epochs;
    double dv_total = 0.0;
    Vec3 v_out = Vec3::Zero();  // flyby velocity at the last asteroid
    double mass = 0.0;          // estimated delivered mass, kg
    double score = 0.0;         // J_i
    MothershipChain chain;
};

/// Per-asteroid Edelbaum estimates towards a ring.
struct RingEstimate {
    std::vector<double> tof_days;
    std::vector<double> mass;  // 0 when the transfer would deplete the asteroid
};

inline RingEstimate estimate_ring_transfers(const Catalog& cat, const RingConfig& ring, const Constants& c = default_constants()) {
    RingEstimate est;
    est.tof_days.resize(cat.size());
    est.mass.resize(cat.size());
    for (std::size_t i = 0; i < cat.size(); ++i) {
        const auto& el = cat[i].elements;
        const double di = plane_angle(el.i, el.raan, ring.i_D, ring.raan_D);
        const auto e = edelbaum(el.a, ring.a_D, di, c);
        est.tof_days[i] = e.tof / c.day;
        try {
            est.mass[i] = asteroid_mass(cat[i].m0, e.tof, c);
        } catch (const InfeasibleError&) {
            est.mass[i] = 0.0;
            log::debug("chain", "asteroid ", cat[i].id, " depleted before reaching the ring");
        }
    }
    return est;
}

inline double ji_value(double mass, double dv, double a_D) {
    const double q = 1.0 + dv / 50.0;
    return 1e-10 * mass / (a_D * a_D * q * q);
}

/// Shared state for chain building over one catalog and ring.
class ChainContext {
public:
    ChainContext(const Catalog& cat, const RingConfig& ring, PruningRules rules = {}, EarthModel earth = {},
                 Constants c = default_constants())
        : cat_(cat), ring_(ring), rules_(rules), earth_(earth), c_(c), excluded_(cat.size(), 0) {
        est_ = estimate_ring_transfers(cat, ring, c);
    }

    const Catalog& catalog() const { return cat_; }
    const RingConfig& ring() const { return ring_; }
    const PruningRules& rules() const { return rules_; }
    const EarthModel& earth() const { return earth_; }
    const Constants& constants() const { return c_; }
    const RingEstimate& estimate() const { return est_; }
    unsigned jobs = 1;

    void exclude(std::int64_t id) { excluded_[cat_.index_of(id)] = 1; }
    bool excluded(std::size_t idx) const { return excluded_[idx] != 0; }
    void clear_exclusions() { std::fill(excluded_.begin(), excluded_.end(), 0); }

    /// Heliocentric states of all catalog asteroids at epoch t (cached).
    const std::vector<CartesianState>& states_at(Epoch t) const {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(t.mjd);
        if (it != cache_.end()) return it->second;
        std::vector<CartesianState> v;
        v.reserve(cat_.size());
        for (const auto& r : cat_) v.push_back(propagate_kepler(r.elements, t, c_));
        return cache_.emplace(t.mjd, std::move(v)).first->second;
    }

    double mass_estimate(const std::vector<std::int64_t>& ids) const {
        double m = 0.0;
        for (auto id : ids) m += est_.mass[cat_.index_of(id)];
        return m;
    }

private:
    const Catalog& cat_;
    RingConfig ring_;
    PruningRules rules_;
    EarthModel earth_;
    Constants c_;
    RingEstimate est_;
    std::vector<char> excluded_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::vector<CartesianState>> cache_;
};

/// J_i of a set of visited asteroids with the given mothership cost.
inline double score_chain_ji(const ChainContext& ctx, const std::vector<std::int64_t>& ids, double dv) {
    if (ids.empty()) return 0.0;
    return ji_value(ctx.mass_estimate(ids), dv, ctx.ring().a_D);
}

/// Deterministic ranking: J_i descending, then dv ascending, then last id ascending.
inline bool node_better(const ChainNode& a, const ChainNode& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.dv_total != b.dv_total) return a.dv_total < b.dv_total;
    const auto la = a.visited.empty() ? -1 : a.visited.back();
    const auto lb = b.visited.empty() ? -1 : b.visited.back();
    return la < lb;
}

inline ChainNode root_node(Epoch launch, int ship = 1) {
    ChainNode n;
    n.chain.launch_epoch = launch;
    n.chain.ship = ship;
    return n;
}

/// All feasible one-asteroid extensions of `nodes`. A root node (no visits)
/// is extended from the Earth; `dt_options` are flight times in days.
inline std::vector<ChainNode> expand_level(const std::vector<ChainNode>& nodes, const ChainContext& ctx,
                                           const std::vector<double>& dt_options) {
    const auto& cat = ctx.catalog();
    const auto& c = ctx.constants();
    const auto& rules = ctx.rules();
    const double t_end = c.t_end_mjd();
    for (const auto& n : nodes) {
        const Epoch t0 = n.epochs.empty() ? n.chain.launch_epoch : n.epochs.back();
        ctx.states_at(t0);
        for (double dt : dt_options)
            if (dt > 0.0 && (t0 + dt).mjd <= t_end) ctx.states_at(t0 + dt);
    }
    std::vector<std::vector<ChainNode>> per_parent(nodes.size());
    parallel_for(nodes.size(), ctx.jobs, [&](std::size_t pi) {
        const ChainNode& parent = nodes[pi];
        const bool root = parent.visited.empty();
        const Epoch t0 = root ? parent.chain.launch_epoch : parent.epochs.back();
        Vec3 r0, v_in;
        if (root) {
            const auto e = earth_state(t0, ctx.earth(), c);
            r0 = e.r;
            v_in = e.v;
        } else {
            const auto& s = ctx.states_at(t0)[cat.index_of(parent.visited.back())];
            r0 = s.r;
            v_in = parent.v_out;
        }
        std::vector<char> seen(cat.size(), 0);
        for (auto id : parent.visited) seen[cat.index_of(id)] = 1;
        auto& out = per_parent[pi];
        for (double dt : dt_options) {
            if (!(dt > 0.0)) continue;
            const Epoch t1 = t0 + dt;
            if (t1.mjd > t_end) continue;
            const auto& states = ctx.states_at(t1);
            for (std::size_t j = 0; j < cat.size(); ++j) {
                if (seen[j] || ctx.excluded(j)) continue;
                if (rules.window_guard && t1.mjd + c.atd_delay_days + ctx.estimate().tof_days[j] > t_end) continue;
                const auto& target = states[j];
                LambertSolution sol;
                try {
                    sol = lambert(r0, target.r, dt * c.day, c.mu_sun);
                } catch (const Error&) {
                    continue;
                }
                const Vec3 dv_dep = sol.v1 - v_in;
                if (root && dv_dep.norm() > rules.v_launch_max) continue;
                const FlybySplit arr = flyby_split_greedy(sol.v2, target.v, sol.v2, c.v_flyby_max);
                const double leg = (root ? 0.0 : dv_dep.norm()) + arr.dv1.norm();
                if (leg > rules.dv_a2a_max) continue;
                const double total = parent.dv_total + leg;
                if (total > rules.dv_total_max) continue;
                if (rules.perihelion_guard && arc_min_radius(r0, sol.v1, dt * c.day, c.mu_sun) < c.r_min_au * c.au)
                    continue;
                ChainNode child = parent;
                child.visited.push_back(cat[j].id);
                child.epochs.push_back(t1);
                child.dv_total = total;
                child.v_out = sol.v2 + arr.dv1;
                child.mass = parent.mass + ctx.estimate().mass[j];
                child.score = ji_value(child.mass, total, ctx.ring().a_D);
                if (root) {
                    child.chain.launch_impulse = dv_dep;
                } else {
                    child.chain.legs.back().dv2 = dv_dep;
                }
                ChainLeg l{};
                l.target = cat[j].id;
                l.encounter = t1;
                l.dv1 = arr.dv1;
                l.v_depart = sol.v1;
                l.v_arrive = sol.v2;
                child.chain.legs.push_back(l);
                out.push_back(std::move(child));
            }
        }
    });
    std::vector<ChainNode> children;
    for (auto& v : per_parent)
        for (auto& ch : v) children.push_back(std::move(ch));
    return children;
}

/// Beam search from an Earth departure at `launch`. bw = 0 keeps every node.
/// Returns the best node over all depths; throws InfeasibleError when no
/// first leg is feasible.
inline ChainNode beam_search(const ChainContext& ctx, Epoch launch, const TranscriptionParams& p, std::size_t bw,
                             const std::vector<double>& dt_options, int ship = 1) {
    if (ctx.catalog().empty()) throw InputError("beam_search: empty catalog");
    std::vector<ChainNode> level = expand_level({root_node(launch, ship)}, ctx, {p.dt_e2a});
    if (level.empty()) throw InfeasibleError("beam_search: no feasible first leg");
    ChainNode best;
    bool have = false;
    while (!level.empty()) {
        std::stable_sort(level.begin(), level.end(), node_better);
        if (bw > 0 && level.size() > bw) level.resize(bw);
        if (!have || node_better(level.front(), best)) {
            best = level.front();
            have = true;
        }
        level = expand_level(level, ctx, dt_options);
    }
    return best;
}

struct Campaign {
    std::vector<ChainNode> ships;
    double J = 0.0;
    double mass = 0.0;
};

/// Overall objective: total estimated mass over the summed ship penalties.
inline double campaign_objective(const std::vector<ChainNode>& ships, double a_D) {
    double m = 0.0, den = 0.0;
    for (const auto& s : ships) {
        m += s.mass;
        const double q = 1.0 + s.dv_total / 50.0;
        den += q * q;
    }
    return den > 0.0 ? 1e-10 * m / (a_D * a_D * den) : 0.0;
}

inline std::vector<double> dt_options_for(const TranscriptionParams& p, double relax_days) {
    if (relax_days <= 0.0) return {p.dt_a2a};
    std::vector<double> out;
    if (p.dt_a2a - relax_days > 0.0) out.push_back(p.dt_a2a - relax_days);
    out.push_back(p.dt_a2a);
    out.push_back(p.dt_a2a + relax_days);
    return out;
}

/// Builds up to n_ships chains launched `spacing` days apart, removing the
/// asteroids visited by earlier ships. `ctx` exclusions are restored.
inline Campaign build_campaign(ChainContext& ctx, const TranscriptionParams& p, std::size_t bw, int n_ships = 10,
                               double spacing = 36.525, double relax_days = 0.0) {
    Campaign camp;
    const auto dts = dt_options_for(p, relax_days);
    std::vector<std::int64_t> removed;
    for (int i = 0; i < n_ships; ++i) {
        const Epoch launch(ctx.constants().t_start_mjd + i * spacing);
        try {
            ChainNode n = beam_search(ctx, launch, p, bw, dts, i + 1);
            for (auto id : n.visited) {
                ctx.exclude(id);
                removed.push_back(id);
            }
            camp.ships.push_back(std::move(n));
        } catch (const InfeasibleError& e) {
            log::info("chain", "ship ", i + 1, " skipped: ", e.what());
        }
    }
    ctx.clear_exclusions();
    camp.J = campaign_objective(camp.ships, ctx.ring().a_D);
    for (const auto& s : camp.ships) camp.mass += s.mass;
    return camp;
}

struct TranscribeBounds {
    double dt_e2a_lo = 150.0, dt_e2a_hi = 450.0;
    double dt_a2a_lo = 90.0, dt_a2a_hi = 300.0;
    double a_D_lo = 0.65, a_D_hi = 2.0;
};

struct TranscribeResult {
    TranscriptionParams params;
    double J = 0.0;
    SearchReport report;
};

/// Outer GA of the nested loop: maximizes the campaign objective over
/// (dt_e2a, dt_a2a, a_D) with an inner beam search.
inline TranscribeResult transcribe(const Catalog& cat, const GaParams& ga, const TranscribeBounds& b = {},
                                   std::size_t bw = 30, int n_ships = 10, double spacing = 36.525,
                                   PruningRules rules = {}, EarthModel earth = {}, Constants c = default_constants()) {
    const SearchSpace space({b.dt_e2a_lo, b.dt_a2a_lo, std::max(b.a_D_lo, c.a_d_min_au)},
                            {b.dt_e2a_hi, b.dt_a2a_hi, std::max(b.a_D_hi, c.a_d_min_au)});
    auto eval = [&](const Point& x) {
        RingConfig ring;
        ring.a_D = x[2];
        ChainContext ctx(cat, ring, rules, earth, c);
        const Campaign camp = build_campaign(ctx, {x[0], x[1], x[2]}, bw, n_ships, spacing);
        return -camp.J;
    };
    TranscribeResult r;
    r.report = ga_minimize(eval, space, ga);
    r.params = {r.report.best_point[0], r.report.best_point[1], r.report.best_point[2]};
    r.J = -r.report.best_value;
    return r;
}

}  // namespace dyson
