#pragma once

// JSON forms of the pipeline's intermediate products and parameter sets.

#include <fstream>
#include <string>

#include <json.hpp>

#include "dyson/chain/beam.hpp"
#include "dyson/chain/refine.hpp"
#include "dyson/dispatch/dispatcher.hpp"
#include "dyson/refine/finalrefine.hpp"

namespace dyson {

using json = nlohmann::json;

inline void to_json(json& j, const Epoch& t) { j = t.mjd; }
inline void from_json(const json& j, Epoch& t) { t = Epoch(j.get<double>()); }

inline json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
inline Vec3 json_vec(const json& j) {
    if (!j.is_array() || j.size() != 3) throw InputError("json: expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Constants, mu_sun, au, day, year_days, f_atd, alpha, v_flyby_max,
                                                v_launch_max, r_min_au, a_d_min_au, atd_delay_days, station_gap_days,
                                                t_start_mjd, mission_years)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(KeplerianElements, a, e, i, raan, argp, M0, ref_epoch)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EarthModel, elements)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RingConfig, a_D, i_D, raan_D, phi_S1, n_stations, phase_ref_mjd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthRanges, a_lo, a_hi, e_lo, e_hi, i_lo, i_hi, m_lo, m_hi, epoch_mjd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PruneBounds, a_max, e_max, i_max, m_min)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TranscriptionParams, dt_e2a, dt_a2a, a_D)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TranscribeBounds, dt_e2a_lo, dt_e2a_hi, dt_a2a_lo, dt_a2a_hi, a_D_lo, a_D_hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PruningRules, dv_a2a_max, dv_total_max, v_launch_max, perihelion_guard,
                                                window_guard)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GaParams, pop, generations, seed, tournament, crossover_p, mutation_sigma,
                                                elites, stall_limit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PsoParams, swarm, iters, stall_limit, seed, w, c1, c2, vmax_frac)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NelderMeadParams, max_evals, x_tol, f_tol, initial_step)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EpochRefineParams, box_days, min_separation_days, pso)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RingBounds, a_lo, a_hi, i_lo, i_hi, raan_lo, raan_hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DsmParams, x_lo, x_hi, box_au, min_gain, nm, restarts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DispatchDecision, x_S, x_NA, x_dt)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RebalanceStep, m_min, m_mean, moved, from, to)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepRow, a_D, mean_J, best_J, best_dt, asteroids)

namespace ode {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Options, rtol, atol, max_steps)
}

namespace lowthrust {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ShootingOptions, ode, max_iter, energy_tol, time_tol, rendezvous_tol,
                                                dt_iterations, dt_tol, multistarts, seed)
}

inline void to_json(json& j, const TableParams& p) {
    j = json{{"n", p.n}, {"n_escalated", p.n_escalated}, {"min_rows", p.min_rows}, {"max_row_jump", p.max_row_jump},
             {"shoot", p.shoot}};
}
inline void from_json(const json& j, TableParams& p) {
    const TableParams d{};
    p.n = j.value("n", d.n);
    p.n_escalated = j.value("n_escalated", d.n_escalated);
    p.min_rows = j.value("min_rows", d.min_rows);
    p.max_row_jump = j.value("max_row_jump", d.max_row_jump);
    p.shoot = j.value("shoot", d.shoot);
}

inline void to_json(json& j, const DispatchParams& p) {
    j = json{{"n_stations", p.n_stations}, {"na_lo", p.na_lo}, {"na_hi", p.na_hi}, {"dt_lo", p.dt_lo},
             {"dt_hi", p.dt_hi},           {"optimizer", p.optimizer}, {"ga", p.ga}, {"pso", p.pso},
             {"seeds", p.seeds}};
}
inline void from_json(const json& j, DispatchParams& p) {
    const DispatchParams d{};
    p.n_stations = j.value("n_stations", d.n_stations);
    p.na_lo = j.value("na_lo", d.na_lo);
    p.na_hi = j.value("na_hi", d.na_hi);
    p.dt_lo = j.value("dt_lo", d.dt_lo);
    p.dt_hi = j.value("dt_hi", d.dt_hi);
    p.optimizer = j.value("optimizer", d.optimizer);
    p.ga = j.value("ga", d.ga);
    p.pso = j.value("pso", d.pso);
    p.seeds = j.value("seeds", d.seeds);
}

// ------------------------------------------------------------------ chains

inline json chain_json(const MothershipChain& ch) {
    json legs = json::array();
    for (const auto& l : ch.legs) {
        json x{{"target", l.target},           {"encounter", l.encounter},         {"dv1", vec_json(l.dv1)},
               {"dv2", vec_json(l.dv2)},       {"v_depart", vec_json(l.v_depart)}, {"v_arrive", vec_json(l.v_arrive)}};
        if (l.dsm) x["dsm"] = {{"epoch", l.dsm->epoch}, {"r", vec_json(l.dsm->r)}, {"dv", vec_json(l.dsm->dv)}};
        legs.push_back(std::move(x));
    }
    return {{"ship", ch.ship}, {"launch_epoch", ch.launch_epoch}, {"launch_impulse", vec_json(ch.launch_impulse)},
            {"legs", std::move(legs)}};
}

inline MothershipChain json_chain(const json& j) {
    MothershipChain ch;
    ch.ship = j.at("ship").get<int>();
    ch.launch_epoch = j.at("launch_epoch").get<Epoch>();
    ch.launch_impulse = json_vec(j.at("launch_impulse"));
    for (const auto& x : j.at("legs")) {
        ChainLeg l{};
        l.target = x.at("target").get<std::int64_t>();
        l.encounter = x.at("encounter").get<Epoch>();
        l.dv1 = json_vec(x.at("dv1"));
        l.dv2 = json_vec(x.at("dv2"));
        l.v_depart = json_vec(x.at("v_depart"));
        l.v_arrive = json_vec(x.at("v_arrive"));
        if (x.contains("dsm")) {
            const auto& d = x["dsm"];
            l.dsm = Dsm{d.at("epoch").get<Epoch>(), json_vec(d.at("r")), json_vec(d.at("dv"))};
        }
        ch.legs.push_back(l);
    }
    return ch;
}

/// Chain file: {"a_D": ..., "chains": [...]} with every MothershipChain field
/// (epochs in MJD, vectors in km and km/s).
struct ChainFile {
    double a_D = 1.0;
    std::vector<MothershipChain> chains;
};

inline json chain_file_json(const ChainFile& f) {
    json arr = json::array();
    for (const auto& ch : f.chains) arr.push_back(chain_json(ch));
    return {{"a_D", f.a_D}, {"chains", std::move(arr)}};
}

inline ChainFile json_chain_file(const json& j) {
    ChainFile f;
    f.a_D = j.value("a_D", 1.0);
    for (const auto& x : j.at("chains")) f.chains.push_back(json_chain(x));
    return f;
}

// ------------------------------------------------------------- assignment

inline json opportunity_json(const TransferOpportunity& o) {
    return {{"asteroid", o.asteroid}, {"station", o.station}, {"t0", o.t0},
            {"tf", o.tf},             {"m_f", o.m_f},         {"lam0", o.lam0}};
}

inline TransferOpportunity json_opportunity(const json& j) {
    TransferOpportunity o;
    o.asteroid = j.at("asteroid").get<std::int64_t>();
    o.station = j.at("station").get<int>();
    o.t0 = j.at("t0").get<Epoch>();
    o.tf = j.at("tf").get<Epoch>();
    o.m_f = j.at("m_f").get<double>();
    o.lam0 = j.at("lam0").get<Vec6<double>>();
    return o;
}

inline json assignment_json(const Assignment& a) {
    json st = json::array();
    for (const auto& v : a.stations) {
        json s = json::array();
        for (const auto& x : v) s.push_back(opportunity_json(x.opp));
        st.push_back(std::move(s));
    }
    return {{"order", a.order}, {"stations", std::move(st)}};
}

inline Assignment json_assignment(const json& j) {
    Assignment a;
    a.order = j.at("order").get<std::vector<int>>();
    for (const auto& s : j.at("stations")) {
        std::vector<Allocation> v;
        for (const auto& x : s) {
            const auto o = json_opportunity(x);
            v.push_back({o.asteroid, o});
        }
        a.stations.push_back(std::move(v));
    }
    return a;
}

inline json dispatch_json(const DispatchReport& r) {
    json ch = json::array();
    for (const auto& c : r.chains) ch.push_back(chain_json(c));
    return {{"decision", r.decision}, {"J", r.J},           {"m_min", r.m_min},         {"station_mass", r.station_mass},
            {"chain_dv", r.chain_dv}, {"seed_J", r.seed_J}, {"history", r.history},     {"first", assignment_json(r.first)},
            {"assignment", assignment_json(r.assignment)},  {"chains", std::move(ch)}};
}

inline DispatchReport json_dispatch(const json& j) {
    DispatchReport r;
    r.decision = j.at("decision").get<DispatchDecision>();
    r.J = j.at("J").get<double>();
    r.m_min = j.at("m_min").get<double>();
    r.station_mass = j.at("station_mass").get<std::vector<double>>();
    r.chain_dv = j.at("chain_dv").get<std::vector<double>>();
    r.seed_J = j.value("seed_J", std::vector<double>{});
    r.history = j.value("history", std::vector<RebalanceStep>{});
    r.first = json_assignment(j.at("first"));
    r.assignment = json_assignment(j.at("assignment"));
    for (const auto& c : j.at("chains")) r.chains.push_back(json_chain(c));
    return r;
}

// ------------------------------------------------------------------ files

inline json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << j.dump(2) << '\n';
}

}  // namespace dyson
