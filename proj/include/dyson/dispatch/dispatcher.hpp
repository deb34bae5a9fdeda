#pragma once

// Asteroid-to-station allocation: station order and counts come from a
// decision vector, a greedy earliest-arrival pass fills the stations, and an
// iterative pass moves asteroids towards the lightest station.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dyson/chain/model.hpp"
#include "dyson/rdv/table.hpp"
#include "dyson/search/searchkit.hpp"

namespace dyson {

struct DispatchDecision {
    std::vector<double> x_S;  // one per station, in [0,1]
    std::vector<int> x_NA;    // asteroids per station (in decoded order)
    double x_dt = 91.0;       // days between consecutive stations

    int n_stations() const { return static_cast<int>(x_S.size()); }
};

struct Allocation {
    std::int64_t asteroid = 0;
    TransferOpportunity opp;
};

/// Stations are 1-based; `stations[s-1]` lists the asteroids sent to s and
/// `order` is the build order.
struct Assignment {
    std::vector<int> order;
    std::vector<std::vector<Allocation>> stations;

    int n_stations() const { return static_cast<int>(stations.size()); }

    double mass(int s) const {
        double m = 0.0;
        for (const auto& a : stations.at(static_cast<std::size_t>(s - 1))) m += a.opp.m_f;
        return m;
    }
    std::vector<double> masses() const {
        std::vector<double> out;
        for (int s = 1; s <= n_stations(); ++s) out.push_back(mass(s));
        return out;
    }
    double min_mass() const {
        const auto m = masses();
        return m.empty() ? 0.0 : *std::min_element(m.begin(), m.end());
    }
    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& v : stations) n += v.size();
        return n;
    }
    std::set<std::int64_t> assigned() const {
        std::set<std::int64_t> out;
        for (const auto& v : stations)
            for (const auto& a : v) out.insert(a.asteroid);
        return out;
    }
    /// Station holding `id`, 0 when unassigned.
    int station_of(std::int64_t id) const {
        for (int s = 1; s <= n_stations(); ++s)
            for (const auto& a : stations[static_cast<std::size_t>(s - 1)])
                if (a.asteroid == id) return s;
        return 0;
    }
};

struct RebalanceStep {
    double m_min = 0.0;
    double m_mean = 0.0;
    std::int64_t moved = 0;  // asteroid allocated in this iteration
    int from = 0;            // 0 = previously unassigned
    int to = 0;
};

struct DispatchReport {
    DispatchDecision decision;
    Assignment first;       // after first allocation
    Assignment assignment;  // after rebalancing
    std::vector<RebalanceStep> history;
    std::vector<double> station_mass;
    double m_min = 0.0;
    std::vector<MothershipChain> chains;  // trimmed
    std::vector<double> chain_dv;         // km/s
    double J = 0.0;
    std::vector<double> seed_J;           // best J of each optimizer run
};

struct DispatchParams {
    int n_stations = 12;
    int na_lo = 12, na_hi = 36;
    double dt_lo = 90.0, dt_hi = 95.0;
    std::string optimizer = "pso";  // ga, pso, ga+pso
    GaParams ga{};
    PsoParams pso{};
    int seeds = 1;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

/// Precomputed table view: every cell's opportunities sorted by arrival.
class DispatchProblem {
public:
    DispatchProblem(const RendezvousTable& table, std::vector<MothershipChain> chains, double a_D,
                    int n_stations = 12, const Constants& c = default_constants())
        : chains_(std::move(chains)), a_D_(a_D), n_stations_(n_stations), c_(c) {
        if (n_stations < 1) throw InputError("dispatch: need at least one station");
        if (!(a_D > 0.0)) throw InputError("dispatch: ring radius must be positive");
        for (const auto& [key, v] : table.cells()) {
            if (key.second < 1 || key.second > n_stations) continue;
            auto w = v;
            std::sort(w.begin(), w.end(), [](const auto& a, const auto& b) {
                return a.tf < b.tf || (a.tf == b.tf && a.m_f > b.m_f);
            });
            cells_[key] = std::move(w);
            ids_.insert(key.first);
        }
        if (ids_.empty()) throw InputError("dispatch: empty rendezvous table");
    }

    const std::vector<TransferOpportunity>& cell(std::int64_t id, int station) const {
        static const std::vector<TransferOpportunity> empty;
        const auto it = cells_.find({id, station});
        return it == cells_.end() ? empty : it->second;
    }
    const std::set<std::int64_t>& asteroids() const { return ids_; }
    const std::vector<MothershipChain>& chains() const { return chains_; }
    double a_D() const { return a_D_; }
    int n_stations() const { return n_stations_; }
    const Constants& constants() const { return c_; }

    /// Earliest-arrival opportunity of `id` to `station` with lo <= tf <= hi.
    const TransferOpportunity* earliest(std::int64_t id, int station, double lo, double hi) const {
        for (const auto& o : cell(id, station)) {
            if (o.tf.mjd < lo) continue;
            if (o.tf.mjd > hi) return nullptr;
            return &o;
        }
        return nullptr;
    }

private:
    std::map<std::pair<std::int64_t, int>, std::vector<TransferOpportunity>> cells_;
    std::set<std::int64_t> ids_;
    std::vector<MothershipChain> chains_;
    double a_D_;
    int n_stations_;
    Constants c_;
};

/// Stable argsort of x_S (ties by station index); returns 1-based stations.
inline std::vector<int> decode_station_order(const std::vector<double>& x_S) {
    std::vector<int> order(x_S.size());
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return x_S[static_cast<std::size_t>(a - 1)] < x_S[static_cast<std::size_t>(b - 1)]; });
    return order;
}

inline void check_decision(const DispatchDecision& d, int n_stations) {
    if (d.n_stations() != n_stations || static_cast<int>(d.x_NA.size()) != n_stations)
        throw InputError("dispatch: decision has the wrong number of stations");
    if (!(d.x_dt >= 0.0)) throw InputError("dispatch: negative station gap");
    for (int n : d.x_NA)
        if (n < 0) throw InputError("dispatch: negative asteroid count");
}

/// Arrival window [lo, hi] for the station at build position k: after the
/// nearest non-empty earlier station's latest arrival plus dt, before the
/// nearest non-empty later station's earliest arrival minus dt. `skip` is
/// ignored when scanning neighbours.
inline std::pair<double, double> station_window(const Assignment& a, std::size_t k, double dt, std::int64_t skip = -1) {
    double lo = -INFINITY, hi = INFINITY;
    for (std::size_t j = k; j-- > 0;) {
        double latest = -INFINITY;
        for (const auto& x : a.stations[static_cast<std::size_t>(a.order[j] - 1)])
            if (x.asteroid != skip) latest = std::max(latest, x.opp.tf.mjd);
        if (latest > -INFINITY) {
            lo = latest + dt;
            break;
        }
    }
    for (std::size_t j = k + 1; j < a.order.size(); ++j) {
        double earliest = INFINITY;
        for (const auto& x : a.stations[static_cast<std::size_t>(a.order[j] - 1)])
            if (x.asteroid != skip) earliest = std::min(earliest, x.opp.tf.mjd);
        if (earliest < INFINITY) {
            hi = earliest - dt;
            break;
        }
    }
    return {lo, hi};
}

/// Greedy pass in build order: each station takes the x_NA earliest
/// eligible arrivals among the remaining asteroids.
inline Assignment first_allocation(const DispatchProblem& p, const DispatchDecision& d) {
    check_decision(d, p.n_stations());
    Assignment a;
    a.order = decode_station_order(d.x_S);
    a.stations.assign(static_cast<std::size_t>(p.n_stations()), {});
    std::set<std::int64_t> remaining = p.asteroids();
    double threshold = -INFINITY;
    for (std::size_t k = 0; k < a.order.size(); ++k) {
        const int s = a.order[k];
        std::vector<Allocation> cand;
        for (std::int64_t id : remaining)
            if (const auto* o = p.earliest(id, s, threshold, INFINITY)) cand.push_back({id, *o});
        std::sort(cand.begin(), cand.end(), [](const Allocation& x, const Allocation& y) {
            if (x.opp.tf != y.opp.tf) return x.opp.tf < y.opp.tf;
            if (x.opp.m_f != y.opp.m_f) return x.opp.m_f > y.opp.m_f;
            return x.asteroid < y.asteroid;
        });
        const auto take = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(d.x_NA[k]));
        auto& st = a.stations[static_cast<std::size_t>(s - 1)];
        for (std::size_t i = 0; i < take; ++i) {
            st.push_back(cand[i]);
            remaining.erase(cand[i].asteroid);
        }
        if (!st.empty()) threshold = st.back().opp.tf.mjd + d.x_dt;
    }
    return a;
}

namespace dispatch_detail {

inline std::size_t position_of(const Assignment& a, int s) {
    return static_cast<std::size_t>(std::find(a.order.begin(), a.order.end(), s) - a.order.begin());
}

/// Lightest station, ties by station index.
inline int lightest(const Assignment& a) {
    int best = 1;
    for (int s = 2; s <= a.n_stations(); ++s)
        if (a.mass(s) < a.mass(best)) best = s;
    return best;
}

/// Asteroids that may leave their station. With `prefix`, each station
/// above the threshold offers its lightest asteroids while the removed total
/// keeps it at or above the threshold; otherwise every asteroid whose single
/// removal keeps the station at or above it. The donor must also stay
/// strictly heavier than the receiving station.
inline std::map<std::int64_t, int> removable(const Assignment& a, int to, double threshold, bool prefix) {
    std::map<std::int64_t, int> out;
    const double m_to = a.mass(to);
    for (int s = 1; s <= a.n_stations(); ++s) {
        if (s == to) continue;
        const double ms = a.mass(s);
        if (!(ms >= threshold)) continue;
        auto v = a.stations[static_cast<std::size_t>(s - 1)];
        std::sort(v.begin(), v.end(), [](const Allocation& x, const Allocation& y) {
            return x.opp.m_f < y.opp.m_f || (x.opp.m_f == y.opp.m_f && x.asteroid < y.asteroid);
        });
        double removed = 0.0;
        for (const auto& x : v) {
            const double left = ms - (prefix ? removed : 0.0) - x.opp.m_f;
            if (left >= threshold && left > m_to) {
                out[x.asteroid] = s;
                removed += x.opp.m_f;
            } else if (prefix) {
                break;
            }
        }
    }
    return out;
}

}  // namespace dispatch_detail

/// One allocation step towards the lightest station; returns false when no
/// pooled asteroid has a compatible arrival.
inline bool rebalance_step(Assignment& a, const DispatchProblem& p, const DispatchDecision& d, double threshold,
                           bool prefix, RebalanceStep* step = nullptr) {
    const int to = dispatch_detail::lightest(a);
    const std::size_t k = dispatch_detail::position_of(a, to);
    const auto pool_assigned = dispatch_detail::removable(a, to, threshold, prefix);
    const auto assigned = a.assigned();
    std::vector<std::pair<std::int64_t, int>> pool;
    for (std::int64_t id : p.asteroids())
        if (!assigned.count(id)) pool.emplace_back(id, 0);
    for (const auto& [id, s] : pool_assigned) pool.emplace_back(id, s);

    const auto base = station_window(a, k, d.x_dt);
    std::optional<Allocation> best;
    int best_from = 0;
    for (const auto& [id, from] : pool) {
        auto w = base;
        if (from != 0) w = station_window(a, k, d.x_dt, id);
        const auto* o = p.earliest(id, to, w.first, w.second);
        if (!o) continue;
        const bool better = !best || o->tf < best->opp.tf ||
                            (o->tf == best->opp.tf &&
                             (o->m_f > best->opp.m_f || (o->m_f == best->opp.m_f && id < best->asteroid)));
        if (better) {
            best = Allocation{id, *o};
            best_from = from;
        }
    }
    if (!best) return false;
    if (best_from != 0) {
        auto& src = a.stations[static_cast<std::size_t>(best_from - 1)];
        src.erase(std::find_if(src.begin(), src.end(), [&](const Allocation& x) { return x.asteroid == best->asteroid; }));
    }
    auto& dst = a.stations[static_cast<std::size_t>(to - 1)];
    dst.push_back(*best);
    std::sort(dst.begin(), dst.end(), [](const Allocation& x, const Allocation& y) { return x.opp.tf < y.opp.tf; });
    if (step) {
        step->moved = best->asteroid;
        step->from = best_from;
        step->to = to;
    }
    return true;
}

/// Mass balancing: mean-mass threshold with lightest-first removal until no
/// move is possible, then a final sweep with the minimum mass as threshold.
inline Assignment rebalance(const Assignment& in, const DispatchProblem& p, const DispatchDecision& d,
                            std::vector<RebalanceStep>* history = nullptr, int max_iter = 100000) {
    Assignment a = in;
    auto record = [&](RebalanceStep s) {
        if (!history) return;
        const auto m = a.masses();
        s.m_min = *std::min_element(m.begin(), m.end());
        s.m_mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
        history->push_back(s);
    };
    record({});
    for (bool final_sweep : {false, true}) {
        for (int it = 0; it < max_iter; ++it) {
            const auto m = a.masses();
            const double mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
            const double threshold = final_sweep ? *std::min_element(m.begin(), m.end()) : mean;
            RebalanceStep s;
            if (!rebalance_step(a, p, d, threshold, !final_sweep, &s)) break;
            record(s);
        }
    }
    return a;
}

/// Drops unassigned asteroids from the end of every chain. The new last
/// leg loses its onward impulse; chains left without legs are removed.
inline std::vector<MothershipChain> trim_chains(const std::vector<MothershipChain>& chains, const Assignment& a) {
    const auto used = a.assigned();
    std::vector<MothershipChain> out;
    for (auto ch : chains) {
        bool cut = false;
        while (!ch.legs.empty() && !used.count(ch.legs.back().target)) {
            ch.legs.pop_back();
            cut = true;
        }
        if (ch.legs.empty()) continue;
        if (cut) ch.legs.back().dv2 = Vec3::Zero();
        out.push_back(std::move(ch));
    }
    return out;
}

/// B 1e-10 m_min / (a_D^2 sum (1 + dv_i/50)^2). The sum runs over the
/// sorted dv so the value does not depend on chain order.
inline double mission_objective(double m_min, double a_D, std::vector<double> dv, double B = 1.0) {
    if (!(m_min > 0.0)) return 0.0;
    std::sort(dv.begin(), dv.end());
    double den = 0.0;
    for (double v : dv) den += (1.0 + v / 50.0) * (1.0 + v / 50.0);
    if (!(den > 0.0)) return 0.0;
    return B * 1e-10 * m_min / (a_D * a_D * den);
}

inline DispatchReport evaluate_decision(const DispatchProblem& p, const DispatchDecision& d, bool keep_history = false) {
    DispatchReport r;
    r.decision = d;
    r.first = first_allocation(p, d);
    r.assignment = rebalance(r.first, p, d, keep_history ? &r.history : nullptr);
    r.station_mass = r.assignment.masses();
    r.m_min = r.assignment.min_mass();
    r.chains = trim_chains(p.chains(), r.assignment);
    for (const auto& ch : r.chains) r.chain_dv.push_back(chain_dv(ch, p.constants()));
    r.J = mission_objective(r.m_min, p.a_D(), r.chain_dv);
    return r;
}

/// Decision <-> search point: x_S (n), x_NA (n), x_dt.
inline DispatchDecision decision_from_point(const Point& x, int n) {
    if (static_cast<int>(x.size()) != 2 * n + 1) throw InputError("dispatch: point has the wrong dimension");
    DispatchDecision d;
    for (int i = 0; i < n; ++i) {
        d.x_S.push_back(x[static_cast<std::size_t>(i)]);
        d.x_NA.push_back(static_cast<int>(std::lround(x[static_cast<std::size_t>(n + i)])));
    }
    d.x_dt = x.back();
    return d;
}

inline Point point_from_decision(const DispatchDecision& d) {
    Point x = d.x_S;
    for (int v : d.x_NA) x.push_back(v);
    x.push_back(d.x_dt);
    return x;
}

inline SearchSpace dispatch_space(const DispatchParams& prm) {
    const auto n = static_cast<std::size_t>(prm.n_stations);
    std::vector<double> lo, hi;
    std::vector<bool> integ;
    for (std::size_t i = 0; i < n; ++i) {
        lo.push_back(0.0);
        hi.push_back(1.0);
        integ.push_back(false);
    }
    for (std::size_t i = 0; i < n; ++i) {
        lo.push_back(prm.na_lo);
        hi.push_back(prm.na_hi);
        integ.push_back(true);
    }
    lo.push_back(prm.dt_lo);
    hi.push_back(prm.dt_hi);
    integ.push_back(false);
    return SearchSpace(lo, hi, integ);
}

/// Metaheuristic search over the decision vector; the best report across
/// `seeds` runs is returned with every run's best J.
inline DispatchReport dispatch(const DispatchProblem& p, const DispatchParams& prm) {
    if (prm.n_stations != p.n_stations()) throw InputError("dispatch: station count mismatch");
    if (prm.dt_lo < p.constants().station_gap_days) throw InputError("dispatch: x_dt lower bound below the station gap");
    if (prm.optimizer != "ga" && prm.optimizer != "pso" && prm.optimizer != "ga+pso")
        throw InputError("dispatch: unknown optimizer " + prm.optimizer);
    const auto space = dispatch_space(prm);
    const int n = prm.n_stations;
    auto f = [&](const Point& x) { return -evaluate_decision(p, decision_from_point(x, n)).J; };
    std::optional<Point> best;
    double best_val = INFINITY;
    std::vector<double> seed_J;
    for (int k = 0; k < std::max(1, prm.seeds); ++k) {
        const std::uint64_t seed = prm.seed + static_cast<std::uint64_t>(k);
        SearchReport rep;
        if (prm.optimizer == "ga" || prm.optimizer == "ga+pso") {
            GaParams g = prm.ga;
            g.seed = seed;
            g.jobs = prm.jobs;
            rep = ga_minimize(f, space, g);
        }
        if (prm.optimizer == "pso" || prm.optimizer == "ga+pso") {
            PsoParams q = prm.pso;
            q.seed = seed;
            q.jobs = prm.jobs;
            if (!rep.best_point.empty()) q.initial.insert(q.initial.begin(), rep.best_point);
            const auto r2 = pso_minimize(f, space, q);
            if (rep.best_point.empty() || r2.best_value <= rep.best_value) rep = r2;
        }
        log::info("dispatch: seed ", seed, " J = ", -rep.best_value);
        seed_J.push_back(-rep.best_value);
        if (rep.best_value < best_val) {
            best_val = rep.best_value;
            best = rep.best_point;
        }
    }
    auto r = evaluate_decision(p, decision_from_point(*best, n), true);
    r.seed_J = seed_J;
    return r;
}

struct SweepRow {
    double a_D = 0.0;
    double mean_J = 0.0;
    double best_J = 0.0;
    double best_dt = 0.0;
    std::size_t asteroids = 0;
};

/// One dispatch per ring radius (each with its own table).
inline std::vector<SweepRow> sweep(const std::vector<std::pair<double, RendezvousTable>>& tables,
                                   const std::vector<MothershipChain>& chains, const DispatchParams& prm,
                                   const Constants& c = default_constants()) {
    std::vector<SweepRow> out;
    for (const auto& [a_D, table] : tables) {
        const DispatchProblem p(table, chains, a_D, prm.n_stations, c);
        const auto r = dispatch(p, prm);
        SweepRow row;
        row.a_D = a_D;
        row.best_J = r.J;
        row.mean_J = std::accumulate(r.seed_J.begin(), r.seed_J.end(), 0.0) / static_cast<double>(r.seed_J.size());
        row.best_dt = r.decision.x_dt;
        row.asteroids = r.assignment.count();
        out.push_back(row);
    }
    return out;
}

}  // namespace dyson
