#pragma once

// Rendezvous table: time-optimal free-longitude transfers sampled over one
// asteroid period, repeated over later periods, and phase-matched to every
// ring station by cubic-spline interpolation.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dyson/astro/transfer.hpp"
#include "dyson/catalog/catalog.hpp"
#include "dyson/chain/model.hpp"
#include "dyson/core/parallel.hpp"
#include "dyson/lowthrust/shooting.hpp"
#include "dyson/rdv/spline.hpp"

namespace dyson {

using lowthrust::Vec6;

struct PhaseRow {
    Epoch t0, tf;
    std::vector<double> dL;  // per station, L_A - L_S at tf
    Vec6<double> lam0{};
    double L_final = 0.0;
    bool primary = true;
    bool warm = false;       // solved from a neighbouring row's costates
    int iterations = 0;      // time-optimal Newton iterations
};

struct TransferOpportunity {
    Epoch t0, tf;
    double m_f = 0.0;
    Vec6<double> lam0{};
    int station = 0;
    std::int64_t asteroid = 0;
};

struct PhaseMatch {
    Epoch t0, tf;
    Vec6<double> lam0{};
    long k = 0;  // dL = 2 k pi
};

struct TableParams {
    int n = 16;
    int n_escalated = 32;
    int min_rows = 8;
    double max_row_jump = kPi / 2.0;  // unwrap step that triggers resampling
    lowthrust::ShootingOptions shoot{};
    unsigned jobs = 1;
};

struct PrimaryResult {
    std::vector<PhaseRow> rows;
    int missing = 0;
    int n = 16;
};

namespace rdv_detail {

inline std::vector<double> phase_differences(const RingConfig& ring, Epoch tf, double L_A, const Constants& c) {
    std::vector<double> dL(static_cast<std::size_t>(ring.n_stations));
    for (int s = 1; s <= ring.n_stations; ++s) dL[static_cast<std::size_t>(s - 1)] = L_A - ring.station_longitude(s, tf, c);
    return dL;
}

inline std::optional<lowthrust::TransferSolution> cold_solve(const AsteroidRecord& ast, Epoch t0, const RingConfig& ring,
                                                             const lowthrust::ShootingOptions& opt, const Constants& c) {
    const auto& el = ast.elements;
    const double di = plane_angle(el.i, el.raan, ring.i_D, ring.raan_D);
    const double guess = edelbaum(el.a, ring.a_D, di, c).tof / c.day;
    try {
        const auto e = lowthrust::solve_energy_optimal(el, t0, ring.slow_elements(c), std::max(guess, 1.0), opt, c);
        if (e.dt_days == 0.0)
            return lowthrust::solve_time_optimal_free_L(el, t0, ring.slow_elements(c), lowthrust::WarmStart{}, opt, c);
        return lowthrust::solve_time_optimal_free_L(el, t0, ring.slow_elements(c), lowthrust::warm_start(e), opt, c);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline std::optional<lowthrust::TransferSolution> warm_solve(const AsteroidRecord& ast, Epoch t0, const RingConfig& ring,
                                                             const PhaseRow& from,
                                                             const lowthrust::ShootingOptions& opt, const Constants& c) {
    const double dt = from.tf - from.t0;
    if (!(dt > 0.0)) return std::nullopt;
    try {
        return lowthrust::solve_time_optimal_free_L(ast.elements, t0, ring.slow_elements(c),
                                                    lowthrust::WarmStart{from.lam0, dt}, opt, c);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline PhaseRow make_row(const lowthrust::TransferSolution& s, const RingConfig& ring, bool warm, const Constants& c) {
    PhaseRow r;
    r.t0 = s.t0;
    r.tf = s.tf;
    r.lam0 = s.lam0;
    r.L_final = s.L_final;
    r.dL = phase_differences(ring, s.tf, s.L_final, c);
    r.warm = warm;
    r.iterations = s.iterations;
    return r;
}

}  // namespace rdv_detail

inline double asteroid_period_days(const AsteroidRecord& ast, const Constants& c = default_constants()) {
    return period_s(ast.elements.a, c) / c.day;
}

/// Departure epochs t_flyby + ATD delay + (k-1) P/n, k = 1..n.
inline std::vector<Epoch> primary_epochs(const AsteroidRecord& ast, Epoch t_flyby, int n,
                                         const Constants& c = default_constants()) {
    const double P = asteroid_period_days(ast, c);
    std::vector<Epoch> out;
    for (int k = 0; k < n; ++k) out.push_back(t_flyby + c.atd_delay_days + k * (P / n));
    return out;
}

/// Free-longitude time-optimal solves at the n primary epochs. Row k is warm
/// started from row k-1; failures fall back to row k-2, a cold energy start,
/// and a +-P/64 shift of t0 before the row is dropped.
inline PrimaryResult primary_collation(const AsteroidRecord& ast, Epoch t_flyby, const RingConfig& ring, int n = 16,
                                       const lowthrust::ShootingOptions& opt = {},
                                       const Constants& c = default_constants()) {
    if (n < 1) throw InputError("primary_collation: n must be positive");
    PrimaryResult out;
    out.n = n;
    const double P = asteroid_period_days(ast, c);
    const auto epochs = primary_epochs(ast, t_flyby, n, c);
    std::vector<std::optional<PhaseRow>> solved(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const Epoch t0 = epochs[static_cast<std::size_t>(k)];
        std::optional<lowthrust::TransferSolution> s;
        bool warm = false;
        for (int back = 1; back <= 2 && !s; ++back) {
            if (k - back < 0 || !solved[static_cast<std::size_t>(k - back)]) continue;
            s = rdv_detail::warm_solve(ast, t0, ring, *solved[static_cast<std::size_t>(k - back)], opt, c);
            warm = s.has_value();
        }
        if (!s) s = rdv_detail::cold_solve(ast, t0, ring, opt, c);
        for (double shift : {P / 64.0, -P / 64.0}) {
            if (s) break;
            const Epoch ts = t0 + shift;
            if (ts < t_flyby + c.atd_delay_days) continue;
            if (k > 0 && solved[static_cast<std::size_t>(k - 1)])
                s = rdv_detail::warm_solve(ast, ts, ring, *solved[static_cast<std::size_t>(k - 1)], opt, c);
            warm = s.has_value();
            if (!s) s = rdv_detail::cold_solve(ast, ts, ring, opt, c);
        }
        if (!s) {
            ++out.missing;
            log::debug("rdvtable: asteroid ", ast.id, " row ", k + 1, " missing");
            continue;
        }
        solved[static_cast<std::size_t>(k)] = rdv_detail::make_row(*s, ring, warm, c);
    }
    for (auto& r : solved)
        if (r) out.rows.push_back(*r);
    return out;
}

/// Copies the primary rows forward by whole asteroid periods while the
/// arrival stays inside the window; dL is recomputed at each new tf.
inline std::vector<PhaseRow> continuation(const std::vector<PhaseRow>& rows, double P_days, Epoch window_end,
                                          const RingConfig& ring, const Constants& c = default_constants()) {
    std::vector<PhaseRow> out = rows;
    for (int m = 1;; ++m) {
        bool any = false;
        for (const auto& r : rows) {
            PhaseRow s = r;
            s.t0 = r.t0 + m * P_days;
            s.tf = s.t0 + (r.tf - r.t0);
            if (s.tf > window_end) continue;
            s.L_final = r.L_final + m * kTwoPi;
            s.dL = rdv_detail::phase_differences(ring, s.tf, s.L_final, c);
            s.primary = false;
            out.push_back(s);
            any = true;
        }
        if (!any) break;
    }
    std::sort(out.begin(), out.end(), [](const PhaseRow& a, const PhaseRow& b) { return a.t0 < b.t0; });
    return out;
}

/// Continuous branch of dL for one station over rows sorted by t0, and the
/// largest row-to-row step.
inline std::pair<std::vector<double>, double> unwrap_phase(const std::vector<PhaseRow>& rows, int station) {
    std::vector<double> u;
    double worst = 0.0;
    const auto s = static_cast<std::size_t>(station - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0) {
            u.push_back(rows[0].dL.at(s));
            continue;
        }
        const double step = std::remainder(rows[i].dL.at(s) - rows[i - 1].dL.at(s), kTwoPi);
        worst = std::max(worst, std::abs(step));
        u.push_back(u.back() + step);
    }
    return {u, worst};
}

/// Departure epochs where the interpolated dL crosses 2 k pi, with the
/// arrival epoch and costates interpolated there.
inline std::vector<PhaseMatch> phase_match(const std::vector<PhaseRow>& rows, int station, double tol_days = 1e-10) {
    std::vector<PhaseMatch> out;
    if (rows.size() < 4) return out;
    std::vector<double> t;
    for (const auto& r : rows) t.push_back(r.t0.mjd);
    const auto [u, worst] = unwrap_phase(rows, station);
    (void)worst;
    const NaturalSpline sL(t, u);
    std::vector<double> tf;
    for (const auto& r : rows) tf.push_back(r.tf.mjd);
    const NaturalSpline sT(t, tf);
    std::array<NaturalSpline, 6> sLam;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.lam0[static_cast<std::size_t>(i)]);
        sLam[static_cast<std::size_t>(i)] = NaturalSpline(t, v);
    }
    const auto [lo, hi] = sL.range();
    for (long k = static_cast<long>(std::ceil(lo / kTwoPi)); k <= static_cast<long>(std::floor(hi / kTwoPi)); ++k) {
        for (double t0 : sL.solve(k * kTwoPi, tol_days)) {
            PhaseMatch m;
            m.t0 = Epoch(t0);
            m.tf = Epoch(sT(t0));
            for (int i = 0; i < 6; ++i) m.lam0[static_cast<std::size_t>(i)] = sLam[static_cast<std::size_t>(i)](t0);
            m.k = k;
            out.push_back(m);
        }
    }
    std::sort(out.begin(), out.end(), [](const PhaseMatch& a, const PhaseMatch& b) { return a.t0 < b.t0; });
    return out;
}

/// Per (asteroid, station) cells of opportunities sorted by t0.
class RendezvousTable {
public:
    using Key = std::pair<std::int64_t, int>;

    void add(const TransferOpportunity& o) { cells_[{o.asteroid, o.station}].push_back(o); }
    void mark_incomplete(std::int64_t id) { incomplete_.insert(id); }

    void sort() {
        for (auto& [k, v] : cells_)
            std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.t0 < b.t0; });
    }

    const std::vector<TransferOpportunity>& cell(std::int64_t asteroid, int station) const {
        static const std::vector<TransferOpportunity> empty;
        const auto it = cells_.find({asteroid, station});
        return it == cells_.end() ? empty : it->second;
    }

    const std::map<Key, std::vector<TransferOpportunity>>& cells() const { return cells_; }
    const std::set<std::int64_t>& incomplete() const { return incomplete_; }

    std::vector<std::int64_t> asteroids() const {
        std::set<std::int64_t> s;
        for (const auto& [k, v] : cells_)
            if (!v.empty()) s.insert(k.first);
        return {s.begin(), s.end()};
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [k, v] : cells_) n += v.size();
        return n;
    }

    int n_stations() const { return n_stations_; }
    void set_n_stations(int n) { n_stations_ = n; }

private:
    std::map<Key, std::vector<TransferOpportunity>> cells_;
    std::set<std::int64_t> incomplete_;
    int n_stations_ = 12;
};

struct AsteroidTable {
    std::vector<TransferOpportunity> opportunities;
    std::vector<PhaseRow> rows;  // primary and continued rows
    int n_used = 16;
    int missing = 0;
    bool incomplete = false;
};

/// Rows, continuation and phase matching for one asteroid visited at t_flyby.
inline AsteroidTable build_asteroid_table(const AsteroidRecord& ast, Epoch t_flyby, const RingConfig& ring,
                                          const TableParams& p = {}, const Constants& c = default_constants()) {
    AsteroidTable out;
    const double P = asteroid_period_days(ast, c);
    const Epoch window_end(c.t_end_mjd());
    PrimaryResult prim;
    std::vector<PhaseRow> rows;
    for (int n : {p.n, p.n_escalated}) {
        prim = primary_collation(ast, t_flyby, ring, n, p.shoot, c);
        out.n_used = n;
        rows = continuation(prim.rows, P, window_end, ring, c);
        double worst = 0.0;
        for (int s = 1; s <= ring.n_stations && rows.size() > 1; ++s) worst = std::max(worst, unwrap_phase(rows, s).second);
        if (worst <= p.max_row_jump || n == p.n_escalated) {
            if (worst > p.max_row_jump) log::warn("rdvtable: asteroid ", ast.id, " phase unwrap still ambiguous at n=", n);
            break;
        }
        log::debug("rdvtable: asteroid ", ast.id, " resampling at n=", p.n_escalated);
    }
    out.missing = prim.missing;
    out.rows = rows;
    const int min_rows = std::max(4, p.min_rows * out.n_used / std::max(1, p.n));
    if (static_cast<int>(prim.rows.size()) < min_rows) {
        out.incomplete = true;
        return out;
    }
    for (int s = 1; s <= ring.n_stations; ++s) {
        for (const auto& m : phase_match(rows, s)) {
            if (m.tf > window_end || !(m.tf > m.t0) || m.t0 < t_flyby + c.atd_delay_days) continue;
            TransferOpportunity o;
            o.t0 = m.t0;
            o.tf = m.tf;
            o.lam0 = m.lam0;
            o.station = s;
            o.asteroid = ast.id;
            try {
                o.m_f = asteroid_mass(ast.m0, (m.tf - m.t0) * c.day, c);
            } catch (const InfeasibleError&) {
                continue;
            }
            out.opportunities.push_back(o);
        }
    }
    return out;
}

/// Table for every asteroid visited by the chains, one parallel task per asteroid.
inline RendezvousTable build_table(const std::vector<MothershipChain>& chains, const RingConfig& ring, const Catalog& cat,
                                   const TableParams& p = {}, const Constants& c = default_constants()) {
    std::vector<std::pair<std::int64_t, Epoch>> visits;
    for (const auto& ch : chains)
        for (const auto& leg : ch.legs) visits.emplace_back(leg.target, leg.encounter);
    std::vector<AsteroidTable> parts(visits.size());
    parallel_for(visits.size(), p.jobs, [&](std::size_t i) {
        parts[i] = build_asteroid_table(cat.at(visits[i].first), visits[i].second, ring, p, c);
    });
    RendezvousTable t;
    t.set_n_stations(ring.n_stations);
    for (std::size_t i = 0; i < visits.size(); ++i) {
        if (parts[i].incomplete) {
            t.mark_incomplete(visits[i].first);
            log::info("rdvtable: asteroid ", visits[i].first, " table incomplete (", parts[i].missing, " rows missing)");
        }
        for (const auto& o : parts[i].opportunities) t.add(o);
    }
    t.sort();
    return t;
}

/// Text format: '#' comments, then one opportunity per line:
/// asteroid station t0 tf m_f lam_p lam_f lam_g lam_h lam_k lam_L
inline void write_table(std::ostream& os, const RendezvousTable& t) {
    os << "# rendezvous table: asteroid station t0[MJD] tf[MJD] m_f[kg] lam0[6]\n";
    os << "# stations " << t.n_stations() << "\n";
    for (std::int64_t id : t.incomplete()) os << "# incomplete " << id << "\n";
    char buf[64];
    for (const auto& [key, v] : t.cells())
        for (const auto& o : v) {
            os << o.asteroid << ' ' << o.station;
            for (double x : {o.t0.mjd, o.tf.mjd, o.m_f}) {
                std::snprintf(buf, sizeof buf, " %.17g", x);
                os << buf;
            }
            for (double x : o.lam0) {
                std::snprintf(buf, sizeof buf, " %.17g", x);
                os << buf;
            }
            os << '\n';
        }
}

inline RendezvousTable read_table(std::istream& is) {
    RendezvousTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string word;
            hs >> word;
            long long v = 0;
            if (word == "stations" && hs >> v) t.set_n_stations(static_cast<int>(v));
            if (word == "incomplete" && hs >> v) t.mark_incomplete(v);
            continue;
        }
        std::istringstream ls(line);
        TransferOpportunity o;
        if (!(ls >> o.asteroid >> o.station >> o.t0.mjd >> o.tf.mjd >> o.m_f))
            throw ParseError("expected 11 fields", lineno);
        for (auto& x : o.lam0)
            if (!(ls >> x)) throw ParseError("expected 11 fields", lineno);
        std::string extra;
        if (ls >> extra) throw ParseError("trailing data", lineno);
        if (o.station < 1 || o.station > t.n_stations() || !(o.tf > o.t0) || !(o.m_f > 0.0))
            throw ParseError("invalid opportunity", lineno);
        t.add(o);
    }
    t.sort();
    return t;
}

inline void save_table(const std::string& path, const RendezvousTable& t) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    write_table(os, t);
}

inline RendezvousTable load_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path);
    return read_table(is);
}

}  // namespace dyson
