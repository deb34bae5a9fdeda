#pragma once

// Mission solution model: validator, scorer, solution text files and plot
// data files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dyson/catalog/catalog.hpp"
#include "dyson/chain/model.hpp"
#include "dyson/core/parallel.hpp"
#include "dyson/dispatch/dispatcher.hpp"
#include "dyson/lowthrust/shooting.hpp"

namespace dyson {

struct MissionTransfer {
    std::int64_t asteroid = 0;
    int station = 0;
    Epoch t0, tf;
    double m_f = 0.0;  // kg
    Vec6<double> lam0{};
};

struct MissionSolution {
    RingConfig ring;
    std::vector<MothershipChain> chains;
    std::vector<MissionTransfer> transfers;
    std::vector<int> build_order;

    /// Delivered mass per station (index s-1); transfers to unknown stations are ignored.
    std::vector<double> station_masses() const {
        std::vector<double> m(static_cast<std::size_t>(std::max(ring.n_stations, 0)), 0.0);
        for (const auto& t : transfers)
            if (t.station >= 1 && t.station <= ring.n_stations) m[static_cast<std::size_t>(t.station - 1)] += t.m_f;
        return m;
    }
    double min_station_mass() const {
        const auto m = station_masses();
        return m.empty() ? 0.0 : *std::min_element(m.begin(), m.end());
    }
};

/// Packs a ring, final chains and an assignment into a solution. Transfers
/// are listed by arrival, then asteroid id.
inline MissionSolution make_solution(const RingConfig& ring, std::vector<MothershipChain> chains, const Assignment& a) {
    MissionSolution sol;
    sol.ring = ring;
    sol.chains = std::move(chains);
    sol.build_order = a.order;
    for (const auto& v : a.stations)
        for (const auto& x : v)
            sol.transfers.push_back({x.asteroid, x.opp.station, x.opp.t0, x.opp.tf, x.opp.m_f, x.opp.lam0});
    std::sort(sol.transfers.begin(), sol.transfers.end(), [](const MissionTransfer& a, const MissionTransfer& b) {
        return a.tf < b.tf || (a.tf == b.tf && a.asteroid < b.asteroid);
    });
    return sol;
}

// ------------------------------------------------------------------- score

/// Per-ship cost: every impulse plus the launch excess above the free cap.
inline std::vector<double> mission_dv(const MissionSolution& sol, const Constants& c = default_constants()) {
    std::vector<double> dv;
    for (const auto& ch : sol.chains) dv.push_back(chain_dv(ch, c));
    return dv;
}

inline double score(const MissionSolution& sol, double B = 1.0, const Constants& c = default_constants()) {
    return mission_objective(sol.min_station_mass(), sol.ring.a_D, mission_dv(sol, c), B);
}

// ---------------------------------------------------------------- validate

struct Violation {
    std::string entity;
    double margin = 0.0;  // negative: amount by which the limit is broken
    std::string what;
};

struct CheckResult {
    std::string name;
    std::string constraint;  // i .. vii, empty for the supporting checks
    bool pass = true;
    double margin = std::numeric_limits<double>::infinity();  // smallest margin seen
    std::string unit;
    std::vector<Violation> violations;

    void observe(const std::string& entity, double m, const std::string& what = {}) {
        margin = std::min(margin, m);
        if (!(m >= 0.0)) {
            pass = false;
            violations.push_back({entity, m, what});
        }
    }
};

struct ValidationReport {
    std::vector<CheckResult> checks;

    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }
    std::vector<std::string> failed() const {
        std::vector<std::string> out;
        for (const auto& c : checks)
            if (!c.pass) out.push_back(c.name);
        return out;
    }
    const CheckResult& check(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return c;
        throw InputError("validate: no check named " + name);
    }
};

struct ValidationOptions {
    double rendezvous_tol = 1e-7;      // canonical units on p, f, g, h, k and L
    double mass_rel_tol = 1e-9;
    double continuity_rel_tol = 1e-7;  // relative position and velocity mismatch
    double speed_tol = 1e-9;           // km/s slack on the flyby and launch caps
    double sample_days = 1.0;          // low-thrust radius sampling step
    int max_impulses = 4;
    int max_ships = 10;
    EarthModel earth{};
    unsigned jobs = 1;
};

namespace missionio_detail {

inline std::string ship_name(const MothershipChain& ch) { return "ship " + std::to_string(ch.ship); }
inline std::string leg_name(const MothershipChain& ch, std::size_t j) {
    return ship_name(ch) + " leg " + std::to_string(j + 1);
}
inline std::string asteroid_name(std::int64_t id) { return "asteroid " + std::to_string(id); }

struct Arc {
    Vec3 r, v;
    double dt = 0.0;  // s
};

/// Conic pieces of one mothership leg and where they end.
struct LegTrace {
    bool ok = false;
    std::vector<Arc> arcs;
    Vec3 r_end = Vec3::Zero(), v_end = Vec3::Zero();
    Vec3 r_dsm_reached = Vec3::Zero();
    Vec3 r_target = Vec3::Zero(), v_target = Vec3::Zero();
    Vec3 v_in = Vec3::Zero();  // velocity this leg should start with
    Vec3 r_start = Vec3::Zero();
};

struct ChainTrace {
    std::vector<LegTrace> legs;
    Vec3 v_earth = Vec3::Zero();
};

inline ChainTrace trace_chain(const MothershipChain& ch, const Catalog& cat, const EarthModel& earth, const Constants& c) {
    ChainTrace tr;
    const auto e = earth_state(ch.launch_epoch, earth, c);
    tr.v_earth = e.v;
    Vec3 r0 = e.r;
    Vec3 v_in = e.v + ch.launch_impulse;
    Epoch t0 = ch.launch_epoch;
    for (const auto& l : ch.legs) {
        LegTrace lt;
        lt.r_start = r0;
        lt.v_in = v_in;
        const AsteroidRecord* a = cat.find(l.target);
        if (a) {
            const auto s = propagate_kepler(a->elements, l.encounter, c);
            lt.r_target = s.r;
            lt.v_target = s.v;
        }
        try {
            if (l.dsm) {
                const double t1 = (l.dsm->epoch - t0) * c.day;
                const double t2 = (l.encounter - l.dsm->epoch) * c.day;
                if (t1 > 0.0 && t2 > 0.0) {
                    lt.arcs.push_back({r0, l.v_depart, t1});
                    const auto [rd, vd] = propagate_state(r0, l.v_depart, t1, c.mu_sun);
                    lt.r_dsm_reached = rd;
                    lt.arcs.push_back({l.dsm->r, vd + l.dsm->dv, t2});
                    std::tie(lt.r_end, lt.v_end) = propagate_state(l.dsm->r, vd + l.dsm->dv, t2, c.mu_sun);
                    lt.ok = true;
                }
            } else {
                const double t1 = (l.encounter - t0) * c.day;
                if (t1 > 0.0) {
                    lt.arcs.push_back({r0, l.v_depart, t1});
                    std::tie(lt.r_end, lt.v_end) = propagate_state(r0, l.v_depart, t1, c.mu_sun);
                    lt.ok = true;
                }
            }
        } catch (const Error&) {
            lt.ok = false;
        }
        tr.legs.push_back(lt);
        r0 = lt.r_target;
        v_in = l.v_arrive + l.dv1 + l.dv2;
        t0 = l.encounter;
    }
    return tr;
}

/// Re-integrated low-thrust arc sampled at no more than `sample_days`.
struct TransferTrace {
    bool ok = false;
    std::vector<lowthrust::ArcSample> samples;
};

inline TransferTrace trace_transfer(const MissionTransfer& t, const Catalog& cat, double sample_days, const Constants& c) {
    TransferTrace tr;
    const AsteroidRecord* a = cat.find(t.asteroid);
    const double span = t.tf - t.t0;
    if (!a || !(span > 0.0)) return tr;
    lowthrust::TransferSolution s;
    s.t0 = t.t0;
    s.tf = t.tf;
    s.lam0 = t.lam0;
    ode::Options o;
    o.max_step = std::min(1.0, sample_days / span);
    try {
        tr.samples = lowthrust::propagate_arc(a->elements, s, o, c);
        tr.ok = !tr.samples.empty();
    } catch (const Error&) {
        tr.ok = false;
    }
    return tr;
}

/// Smallest radius along a sampled arc; around the sampled minimum the
/// osculating conic of the neighbouring sample is searched exactly.
inline double sampled_min_radius(const std::vector<lowthrust::ArcSample>& s, const Constants& c) {
    if (s.empty()) return std::numeric_limits<double>::infinity();
    std::vector<CartesianState> x;
    for (const auto& a : s) x.push_back(mee_to_cart(a.x, c));
    std::size_t k = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i].r.norm() < x[k].r.norm()) k = i;
    double r = x[k].r.norm();
    const std::size_t lo = k > 0 ? k - 1 : 0;
    const std::size_t hi = std::min(k + 1, x.size() - 1);
    if (hi > lo) r = std::min(r, arc_min_radius(x[lo].r, x[lo].v, (s[hi].t - s[lo].t) * c.day, c.mu_sun));
    return r;
}

inline double rel_err(const Vec3& a, const Vec3& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace missionio_detail

/// Checks every mission constraint and reports each with its margins.
inline ValidationReport validate(const MissionSolution& sol, const Catalog& cat, const ValidationOptions& opt = {},
                                 const Constants& c = default_constants()) {
    namespace md = missionio_detail;
    const std::size_t n_tr = sol.transfers.size();
    std::vector<md::ChainTrace> chains(sol.chains.size());
    std::vector<md::TransferTrace> arcs(n_tr);
    parallel_for(sol.chains.size() + n_tr, opt.jobs, [&](std::size_t i) {
        if (i < sol.chains.size())
            chains[i] = md::trace_chain(sol.chains[i], cat, opt.earth, c);
        else
            arcs[i - sol.chains.size()] = md::trace_transfer(sol.transfers[i - sol.chains.size()], cat, opt.sample_days, c);
    });
    std::map<std::int64_t, Epoch> flyby;
    for (const auto& ch : sol.chains)
        for (const auto& l : ch.legs)
            if (!flyby.count(l.target)) flyby[l.target] = l.encounter;

    const double t_lo = c.t_start_mjd, t_hi = c.t_end_mjd();
    const double inf = std::numeric_limits<double>::infinity();

    auto window = [&](CheckResult& r) {
        auto in = [&](const std::string& who, Epoch t) { r.observe(who, std::min(t.mjd - t_lo, t_hi - t.mjd)); };
        for (const auto& ch : sol.chains) {
            in(md::ship_name(ch) + " launch", ch.launch_epoch);
            for (std::size_t j = 0; j < ch.legs.size(); ++j) {
                if (ch.legs[j].dsm) in(md::leg_name(ch, j) + " dsm", ch.legs[j].dsm->epoch);
                in(md::leg_name(ch, j) + " flyby", ch.legs[j].encounter);
            }
        }
        for (const auto& t : sol.transfers) {
            in(md::asteroid_name(t.asteroid) + " departure", t.t0);
            in(md::asteroid_name(t.asteroid) + " arrival", t.tf);
        }
    };
    auto atd = [&](CheckResult& r) {
        for (const auto& t : sol.transfers) {
            const auto it = flyby.find(t.asteroid);
            if (it == flyby.end())
                r.observe(md::asteroid_name(t.asteroid), -inf, "no mothership flyby");
            else
                r.observe(md::asteroid_name(t.asteroid), t.t0 - it->second - c.atd_delay_days);
        }
    };
    auto rendezvous = [&](CheckResult& r) {
        const auto tgt = lowthrust::canonical_slow(sol.ring.slow_elements(c), c);
        for (std::size_t i = 0; i < n_tr; ++i) {
            const auto& t = sol.transfers[i];
            const std::string who = md::asteroid_name(t.asteroid);
            if (!arcs[i].ok) {
                r.observe(who, -inf, "arc could not be integrated");
                continue;
            }
            const auto& last = arcs[i].samples.back();
            const auto xf = lowthrust::to_canonical(last.x, c);
            double err = std::abs(last.t - t.tf) / (t.tf - t.t0);
            for (int k = 0; k < 5; ++k) err = std::max(err, std::abs(xf[static_cast<std::size_t>(k)] - tgt[static_cast<std::size_t>(k)]));
            if (t.station >= 1 && t.station <= sol.ring.n_stations)
                err = std::max(err, std::abs(std::remainder(xf[5] - sol.ring.station_longitude(t.station, t.tf, c), kTwoPi)));
            else
                err = inf;
            r.observe(who, opt.rendezvous_tol - err);
        }
    };
    auto mass = [&](CheckResult& r) {
        for (const auto& t : sol.transfers) {
            const AsteroidRecord* a = cat.find(t.asteroid);
            const std::string who = md::asteroid_name(t.asteroid);
            if (!a) {
                r.observe(who, -inf, "not in catalog");
                continue;
            }
            const double expect = a->m0 * (1.0 - c.alpha * (t.tf - t.t0) * c.day);
            if (!(expect > 0.0)) {
                r.observe(who, expect / a->m0, "asteroid consumed before arrival");
                continue;
            }
            r.observe(who, opt.mass_rel_tol - std::abs(t.m_f - expect) / expect);
        }
    };
    auto gap = [&](CheckResult& r) {
        std::map<int, std::pair<double, double>> span;
        for (const auto& t : sol.transfers) {
            auto [it, fresh] = span.try_emplace(t.station, t.tf.mjd, t.tf.mjd);
            if (!fresh) {
                it->second.first = std::min(it->second.first, t.tf.mjd);
                it->second.second = std::max(it->second.second, t.tf.mjd);
            }
        }
        double prev_hi = -inf;
        int prev = 0;
        for (int s : sol.build_order) {
            const auto it = span.find(s);
            if (it == span.end()) continue;
            if (prev)
                r.observe("station " + std::to_string(prev) + " -> " + std::to_string(s),
                          it->second.first - prev_hi - c.station_gap_days);
            prev_hi = it->second.second;
            prev = s;
        }
    };
    auto perihelion = [&](CheckResult& r) {
        const double lim = c.r_min_au * c.au;
        for (std::size_t i = 0; i < sol.chains.size(); ++i)
            for (std::size_t j = 0; j < chains[i].legs.size(); ++j)
                for (const auto& a : chains[i].legs[j].arcs)
                    r.observe(md::leg_name(sol.chains[i], j), (arc_min_radius(a.r, a.v, a.dt, c.mu_sun) - lim) / c.au);
        for (std::size_t i = 0; i < n_tr; ++i)
            if (arcs[i].ok)
                r.observe(md::asteroid_name(sol.transfers[i].asteroid) + " transfer",
                          (md::sampled_min_radius(arcs[i].samples, c) - lim) / c.au);
    };
    auto ring_radius = [&](CheckResult& r) { r.observe("ring", sol.ring.a_D - c.a_d_min_au); };
    auto flyby_speed = [&](CheckResult& r) {
        for (std::size_t i = 0; i < sol.chains.size(); ++i)
            for (std::size_t j = 0; j < sol.chains[i].legs.size(); ++j) {
                const auto& l = sol.chains[i].legs[j];
                if (!cat.find(l.target)) continue;
                const double v = (l.v_arrive + l.dv1 - chains[i].legs[j].v_target).norm();
                r.observe(md::leg_name(sol.chains[i], j), c.v_flyby_max + opt.speed_tol - v);
            }
    };
    auto launch_speed = [&](CheckResult& r) {
        for (const auto& ch : sol.chains)
            if (!ch.legs.empty()) r.observe(md::ship_name(ch), c.v_launch_max + opt.speed_tol - ch.launch_impulse.norm());
    };
    auto impulses = [&](CheckResult& r) {
        for (const auto& ch : sol.chains)
            for (std::size_t j = 0; j < ch.legs.size(); ++j) {
                const Vec3 dep = j == 0 ? ch.launch_impulse : ch.legs[j - 1].dv2;
                const auto& l = ch.legs[j];
                const int n = (dep.norm() > 0.0) + (l.dsm && l.dsm->dv.norm() > 0.0) + (l.dv1.norm() > 0.0);
                r.observe(md::leg_name(ch, j), opt.max_impulses - n);
            }
    };
    auto continuity = [&](CheckResult& r) {
        const double tol = opt.continuity_rel_tol;
        for (std::size_t i = 0; i < sol.chains.size(); ++i) {
            const auto& ch = sol.chains[i];
            for (std::size_t j = 0; j < ch.legs.size(); ++j) {
                const auto& l = ch.legs[j];
                const auto& lt = chains[i].legs[j];
                const std::string who = md::leg_name(ch, j);
                if (!lt.ok || !cat.find(l.target)) {
                    r.observe(who, -inf, "leg cannot be propagated");
                    continue;
                }
                r.observe(who, tol - md::rel_err(l.v_depart, lt.v_in), "departure velocity");
                if (l.dsm) r.observe(who, tol - md::rel_err(lt.r_dsm_reached, l.dsm->r), "dsm position");
                r.observe(who, tol - md::rel_err(lt.r_end, lt.r_target), "encounter position");
                r.observe(who, tol - md::rel_err(lt.v_end, l.v_arrive), "arrival velocity");
            }
        }
    };
    auto consistency = [&](CheckResult& r) {
        const int n = sol.ring.n_stations;
        std::vector<int> order = sol.build_order;
        std::sort(order.begin(), order.end());
        std::vector<int> expect(static_cast<std::size_t>(std::max(n, 0)));
        std::iota(expect.begin(), expect.end(), 1);
        r.observe("build order", order == expect ? 0.0 : -1.0, "not a permutation of the stations");
        r.observe("ships", static_cast<double>(opt.max_ships) - static_cast<double>(sol.chains.size()));
        std::set<std::int64_t> seen, sent;
        for (const auto& ch : sol.chains) {
            Epoch prev = ch.launch_epoch;
            for (std::size_t j = 0; j < ch.legs.size(); ++j) {
                const auto& l = ch.legs[j];
                const std::string who = md::leg_name(ch, j);
                if (!cat.find(l.target)) r.observe(who, -1.0, "unknown asteroid " + std::to_string(l.target));
                if (!seen.insert(l.target).second) r.observe(who, -1.0, "asteroid visited twice");
                if (l.dsm && !(l.dsm->epoch > prev && l.dsm->epoch < l.encounter)) r.observe(who, -1.0, "dsm outside its leg");
                r.observe(who, l.encounter - prev, "epochs not increasing");
                prev = l.encounter;
            }
        }
        for (const auto& t : sol.transfers) {
            const std::string who = md::asteroid_name(t.asteroid);
            if (!cat.find(t.asteroid)) r.observe(who, -1.0, "not in catalog");
            if (!sent.insert(t.asteroid).second) r.observe(who, -1.0, "sent twice");
            if (t.station < 1 || t.station > n) r.observe(who, -1.0, "bad station");
            r.observe(who, t.tf - t.t0, "arrival before departure");
            r.observe(who, t.m_f, "non-positive mass");
        }
    };

    struct Check {
        const char* name;
        const char* constraint;
        const char* unit;
        std::function<void(CheckResult&)> run;
    };
    const std::vector<Check> suite{
        {"window", "i", "day", window},
        {"atd_delay", "ii", "day", atd},
        {"rendezvous", "iii", "canonical", rendezvous},
        {"mass", "iv", "relative", mass},
        {"station_gap", "v", "day", gap},
        {"perihelion", "vi", "AU", perihelion},
        {"ring_radius", "vii", "AU", ring_radius},
        {"flyby_speed", "", "km/s", flyby_speed},
        {"launch_speed", "", "km/s", launch_speed},
        {"impulses", "", "count", impulses},
        {"continuity", "", "relative", continuity},
        {"consistency", "", "", consistency},
    };
    ValidationReport rep;
    rep.checks.resize(suite.size());
    parallel_for(suite.size(), opt.jobs, [&](std::size_t i) {
        CheckResult r;
        r.name = suite[i].name;
        r.constraint = suite[i].constraint;
        r.unit = suite[i].unit;
        suite[i].run(r);
        rep.checks[i] = std::move(r);
    });
    return rep;
}

inline void write_report(std::ostream& os, const ValidationReport& rep, std::size_t max_listed = 5) {
    char buf[64];
    for (const auto& c : rep.checks) {
        std::string tag = c.constraint.empty() ? c.name : c.name + " (" + c.constraint + ")";
        std::snprintf(buf, sizeof buf, "%.6g", c.margin);
        os << (c.pass ? "PASS " : "FAIL ") << tag << "  margin " << buf << (c.unit.empty() ? "" : " " + c.unit) << '\n';
        for (std::size_t k = 0; k < c.violations.size() && k < max_listed; ++k) {
            const auto& v = c.violations[k];
            std::snprintf(buf, sizeof buf, "%.6g", v.margin);
            os << "     " << v.entity << ": " << buf << (v.what.empty() ? "" : " (" + v.what + ")") << '\n';
        }
        if (c.violations.size() > max_listed) os << "     ... " << c.violations.size() - max_listed << " more\n";
    }
    os << (rep.pass() ? "all checks passed" : "validation failed") << '\n';
}

// ------------------------------------------------------------ solution file

/// Line format ('#' starts a comment):
///   ring a_D i_D raan_D phi_S1 n_stations phase_ref_mjd
///   order s1 .. sn
///   chain ship
///   <mjd> launch dv(3) [v_depart(3)]
///   <mjd> dsm r(3) dv(3)
///   <mjd> impulse dv1(3)
///   <mjd> flyby id v_arrive(3)
///   <mjd> impulse dv2(3) [v_depart of the next leg(3)]
///   end
///   transfer asteroid station t0 tf m_f lam0(6)
/// Vectors in km and km/s, angles in rad.
inline void write_solution(std::ostream& os, const MissionSolution& sol) {
    char buf[40];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, " %.17g", x);
        os << buf;
    };
    auto vec = [&](const Vec3& v) {
        for (int k = 0; k < 3; ++k) num(v[k]);
    };
    os << "# dyson mission solution\n";
    os << "ring";
    for (double x : {sol.ring.a_D, sol.ring.i_D, sol.ring.raan_D, sol.ring.phi_S1}) num(x);
    os << ' ' << sol.ring.n_stations;
    num(sol.ring.phase_ref_mjd);
    os << "\norder";
    for (int s : sol.build_order) os << ' ' << s;
    os << '\n';
    for (const auto& ch : sol.chains) {
        os << "chain " << ch.ship << '\n';
        std::snprintf(buf, sizeof buf, "%.17g", ch.launch_epoch.mjd);
        os << buf << " launch";
        vec(ch.launch_impulse);
        if (!ch.legs.empty()) vec(ch.legs.front().v_depart);
        os << '\n';
        for (std::size_t j = 0; j < ch.legs.size(); ++j) {
            const auto& l = ch.legs[j];
            std::string t;
            std::snprintf(buf, sizeof buf, "%.17g", l.encounter.mjd);
            t = buf;
            if (l.dsm) {
                std::snprintf(buf, sizeof buf, "%.17g", l.dsm->epoch.mjd);
                os << buf << " dsm";
                vec(l.dsm->r);
                vec(l.dsm->dv);
                os << '\n';
            }
            os << t << " impulse";
            vec(l.dv1);
            os << '\n' << t << " flyby " << l.target;
            vec(l.v_arrive);
            os << '\n' << t << " impulse";
            vec(l.dv2);
            if (j + 1 < ch.legs.size()) vec(ch.legs[j + 1].v_depart);
            os << '\n';
        }
        os << "end\n";
    }
    for (const auto& t : sol.transfers) {
        os << "transfer " << t.asteroid << ' ' << t.station;
        for (double x : {t.t0.mjd, t.tf.mjd, t.m_f}) num(x);
        for (double x : t.lam0) num(x);
        os << '\n';
    }
}

inline MissionSolution read_solution(std::istream& is) {
    MissionSolution sol;
    std::string line;
    std::size_t no = 0;
    bool have_ring = false, have_order = false;
    // Chain parser state: 0 outside, 1 expecting dsm/impulse, 2 after a dsm,
    // 3 expecting flyby, 4 expecting the post-flyby impulse, 5 expecting end.
    int state = 0;
    MothershipChain ch;
    ChainLeg leg{};
    auto numbers = [&](std::istringstream& ss, std::size_t n_min, std::size_t n_max) {
        std::vector<double> v;
        std::string tok;
        while (ss >> tok) {
            double x = 0.0;
            if (!detail::parse_number(tok, x)) throw ParseError("bad number '" + tok + "'", no);
            v.push_back(x);
        }
        if (v.size() < n_min || v.size() > n_max)
            throw ParseError("expected " + std::to_string(n_min) + (n_max != n_min ? " or " + std::to_string(n_max) : "") +
                                 " numbers, got " + std::to_string(v.size()),
                             no);
        return v;
    };
    auto v3 = [](const std::vector<double>& v, std::size_t at) { return Vec3(v[at], v[at + 1], v[at + 2]); };
    auto integer = [&](std::istringstream& ss, const char* what) {
        long long x = 0;
        if (!(ss >> x)) throw ParseError(std::string("expected ") + what, no);
        return x;
    };
    while (std::getline(is, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string head;
        if (!(ss >> head)) continue;
        if (state == 0) {
            if (head == "ring") {
                const auto v = numbers(ss, 6, 6);
                if (v[4] != std::floor(v[4]) || v[4] < 1) throw ParseError("bad station count", no);
                sol.ring = RingConfig{v[0], v[1], v[2], v[3], static_cast<int>(v[4]), v[5]};
                have_ring = true;
            } else if (head == "order") {
                long long s = 0;
                while (ss >> s) sol.build_order.push_back(static_cast<int>(s));
                if (!ss.eof()) throw ParseError("bad station index", no);
                have_order = true;
            } else if (head == "chain") {
                ch = MothershipChain{};
                ch.ship = static_cast<int>(integer(ss, "ship number"));
                state = -1;
            } else if (head == "transfer") {
                MissionTransfer t;
                t.asteroid = integer(ss, "asteroid id");
                t.station = static_cast<int>(integer(ss, "station"));
                const auto v = numbers(ss, 9, 9);
                t.t0 = Epoch(v[0]);
                t.tf = Epoch(v[1]);
                t.m_f = v[2];
                for (std::size_t k = 0; k < 6; ++k) t.lam0[k] = v[3 + k];
                sol.transfers.push_back(t);
            } else {
                throw ParseError("unknown record '" + head + "'", no);
            }
            continue;
        }
        if (head == "end") {
            if (state != -2 && state != 5) throw ParseError("chain ends in the middle of a leg", no);
            sol.chains.push_back(std::move(ch));
            state = 0;
            continue;
        }
        double t = 0.0;
        if (!detail::parse_number(head, t)) throw ParseError("expected an epoch or 'end'", no);
        std::string type;
        if (!(ss >> type)) throw ParseError("missing event type", no);
        if (state == -1) {
            if (type != "launch") throw ParseError("chain must start with a launch", no);
            const auto v = numbers(ss, 3, 6);
            ch.launch_epoch = Epoch(t);
            ch.launch_impulse = v3(v, 0);
            if (v.size() == 6) {
                leg = ChainLeg{};
                leg.v_depart = v3(v, 3);
                state = 1;
            } else {
                state = -2;
            }
            continue;
        }
        if (state == -2 || state == 5) throw ParseError("expected 'end'", no);
        if (type == "dsm") {
            if (state != 1) throw ParseError("unexpected dsm", no);
            const auto v = numbers(ss, 6, 6);
            leg.dsm = Dsm{Epoch(t), v3(v, 0), v3(v, 3)};
            state = 2;
        } else if (type == "impulse") {
            if (state == 1 || state == 2) {
                leg.dv1 = v3(numbers(ss, 3, 3), 0);
                leg.encounter = Epoch(t);
                state = 3;
            } else if (state == 4) {
                if (Epoch(t) != leg.encounter) throw ParseError("impulse epoch differs from its flyby", no);
                const auto v = numbers(ss, 3, 6);
                leg.dv2 = v3(v, 0);
                ch.legs.push_back(leg);
                if (v.size() == 6) {
                    leg = ChainLeg{};
                    leg.v_depart = v3(v, 3);
                    state = 1;
                } else {
                    state = 5;
                }
            } else {
                throw ParseError("unexpected impulse", no);
            }
        } else if (type == "flyby") {
            if (state != 3) throw ParseError("flyby without its arrival impulse", no);
            if (Epoch(t) != leg.encounter) throw ParseError("flyby epoch differs from its impulse", no);
            leg.target = integer(ss, "asteroid id");
            leg.v_arrive = v3(numbers(ss, 3, 3), 0);
            state = 4;
        } else if (type == "launch") {
            throw ParseError("second launch in one chain", no);
        } else {
            throw ParseError("unknown event '" + type + "'", no);
        }
    }
    if (state != 0) throw ParseError("file ends inside a chain", no + 1);
    if (!have_ring) throw ParseError("missing ring record", no + 1);
    if (!have_order) throw ParseError("missing order record", no + 1);
    return sol;
}

inline void save_solution(const std::string& path, const MissionSolution& sol) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    write_solution(os, sol);
}

inline MissionSolution load_solution(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path);
    return read_solution(is);
}

// -------------------------------------------------------------- plot data

struct PlotInputs {
    std::vector<RebalanceStep> history;
    std::vector<SweepRow> sweep;
    double trajectory_step_days = 5.0;
    EarthModel earth{};
};

namespace missionio_detail {

class Csv {
public:
    Csv(const std::filesystem::path& p, const std::string& header) : os_(p) {
        if (!os_) throw InputError("cannot write " + p.string());
        os_ << header << '\n';
    }
    Csv& operator<<(double x) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12g", x);
        return put(buf);
    }
    Csv& operator<<(long long x) { return put(std::to_string(x)); }
    Csv& operator<<(const std::string& s) { return put(s); }
    void end() {
        os_ << '\n';
        first_ = true;
    }

private:
    Csv& put(const std::string& s) {
        if (!first_) os_ << ',';
        os_ << s;
        first_ = false;
        return *this;
    }
    std::ofstream os_;
    bool first_ = true;
};

}  // namespace missionio_detail

/// Writes one CSV per plot type into `dir` and returns the file names.
inline std::vector<std::string> emit_plots(const MissionSolution& sol, const Catalog& cat, const std::string& dir,
                                           const PlotInputs& in = {}, const Constants& c = default_constants()) {
    namespace md = missionio_detail;
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path d(dir);
    std::vector<std::string> files;
    {
        md::Csv f(d / "mass_vs_arrival.csv", "asteroid,station,tf_mjd,m_f_kg");
        for (const auto& t : sol.transfers) {
            f << static_cast<long long>(t.asteroid) << static_cast<long long>(t.station) << t.tf.mjd << t.m_f;
            f.end();
        }
        files.push_back("mass_vs_arrival.csv");
    }
    {
        md::Csv f(d / "rebalance_trace.csv", "iteration,m_min_kg,m_mean_kg,moved,from,to");
        for (std::size_t i = 0; i < in.history.size(); ++i) {
            const auto& h = in.history[i];
            f << static_cast<long long>(i) << h.m_min << h.m_mean << static_cast<long long>(h.moved)
              << static_cast<long long>(h.from) << static_cast<long long>(h.to);
            f.end();
        }
        files.push_back("rebalance_trace.csv");
    }
    {
        md::Csv f(d / "station_counts.csv", "station,build_position,count,mass_kg");
        const auto m = sol.station_masses();
        for (int s = 1; s <= sol.ring.n_stations; ++s) {
            const auto it = std::find(sol.build_order.begin(), sol.build_order.end(), s);
            const long long pos = it == sol.build_order.end() ? 0 : (it - sol.build_order.begin()) + 1;
            const long long n = std::count_if(sol.transfers.begin(), sol.transfers.end(),
                                              [&](const MissionTransfer& t) { return t.station == s; });
            f << static_cast<long long>(s) << pos << n << m[static_cast<std::size_t>(s - 1)];
            f.end();
        }
        files.push_back("station_counts.csv");
    }
    {
        md::Csv f(d / "radius_sweep.csv", "a_D_au,mean_J,best_J,best_dt_days,asteroids");
        for (const auto& r : in.sweep) {
            f << r.a_D << r.mean_J << r.best_J << r.best_dt << static_cast<long long>(r.asteroids);
            f.end();
        }
        files.push_back("radius_sweep.csv");
    }
    {
        md::Csv f(d / "trajectories.csv", "kind,id,leg,mjd,x_km,y_km,z_km");
        const double step = in.trajectory_step_days;
        for (std::size_t i = 0; i < sol.chains.size(); ++i) {
            const auto& ch = sol.chains[i];
            const auto tr = md::trace_chain(ch, cat, in.earth, c);
            Epoch t0 = ch.launch_epoch;
            for (std::size_t j = 0; j < tr.legs.size(); ++j) {
                Epoch ts = t0;
                for (const auto& a : tr.legs[j].arcs) {
                    const double days = a.dt / c.day;
                    const int n = std::max(1, static_cast<int>(std::ceil(days / step)));
                    for (int k = 0; k <= n; ++k) {
                        const double tau = days * k / n;
                        const auto [r, v] = propagate_state(a.r, a.v, tau * c.day, c.mu_sun);
                        f << std::string("mothership") << static_cast<long long>(ch.ship) << static_cast<long long>(j + 1)
                          << ts.mjd + tau << r[0] << r[1] << r[2];
                        f.end();
                    }
                    ts = ts + days;
                }
                t0 = ch.legs[j].encounter;
            }
        }
        for (const auto& t : sol.transfers) {
            const auto tr = md::trace_transfer(t, cat, step, c);
            double next = t.t0.mjd;
            for (std::size_t k = 0; k < tr.samples.size(); ++k) {
                const auto& s = tr.samples[k];
                if (s.t.mjd + 1e-9 < next && k + 1 < tr.samples.size()) continue;
                const auto x = mee_to_cart(s.x, c);
                f << std::string("transfer") << static_cast<long long>(t.asteroid) << static_cast<long long>(t.station)
                  << s.t.mjd << x.r[0] << x.r[1] << x.r[2];
                f.end();
                next = s.t.mjd + step;
            }
        }
        files.push_back("trajectories.csv");
    }
    return files;
}

}  // namespace dyson
