#pragma once

// End-to-end pipeline: chains, chain refinement, rendezvous table,
// dispatcher, final refinement, validation and score. All numeric defaults
// live in PipelineConfig and round-trip through JSON.

#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dyson/mission/json_io.hpp"
#include "dyson/mission/missionio.hpp"

namespace dyson {

struct ChainStageConfig {
    std::size_t bw = 30;
    int ships = 10;
    double spacing_days = 36.525;
    double relax_days = 0.0;
    PruningRules rules{};
};

struct TranscribeConfig {
    bool search = false;  // run the outer GA instead of using `params`
    TranscriptionParams params{};
    TranscribeBounds bounds{};
    GaParams ga{.pop = 20, .generations = 10};
};

struct ChainRefineConfig {
    EpochRefineParams epochs{};
    bool ring = true;
    PsoParams ring_pso{.swarm = 30, .iters = 60, .stall_limit = 20};
    RingBounds ring_bounds{};
};

struct FinalRefineConfig {
    DsmParams dsm{};
    lowthrust::ShootingOptions shoot{};
};

struct ValidateConfig {
    double rendezvous_tol = 1e-7;
    double mass_rel_tol = 1e-9;
    double continuity_rel_tol = 1e-7;
    double speed_tol = 1e-9;
    double sample_days = 1.0;
    int max_impulses = 4;
    int max_ships = 10;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    double B = 1.0;
    Constants constants{};
    EarthModel earth{};
    std::size_t synth_n = 500;
    SynthRanges synth{};
    PruneBounds prune{};
    TranscribeConfig transcribe{};
    ChainStageConfig chains{};
    ChainRefineConfig refine_chains{};
    TableParams table{};
    DispatchParams dispatch{};
    std::vector<double> sweep_radii;  // extra a_D values for the radius sweep
    FinalRefineConfig refine{};
    ValidateConfig validate{};

    ValidationOptions validation_options() const {
        ValidationOptions o;
        o.rendezvous_tol = validate.rendezvous_tol;
        o.mass_rel_tol = validate.mass_rel_tol;
        o.continuity_rel_tol = validate.continuity_rel_tol;
        o.speed_tol = validate.speed_tol;
        o.sample_days = validate.sample_days;
        o.max_impulses = validate.max_impulses;
        o.max_ships = validate.max_ships;
        o.earth = earth;
        o.jobs = jobs;
        return o;
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ChainStageConfig, bw, ships, spacing_days, relax_days, rules)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TranscribeConfig, search, params, bounds, ga)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ChainRefineConfig, epochs, ring, ring_pso, ring_bounds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FinalRefineConfig, dsm, shoot)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ValidateConfig, rendezvous_tol, mass_rel_tol, continuity_rel_tol, speed_tol,
                                                sample_days, max_impulses, max_ships)

inline void to_json(json& j, const PipelineConfig& p) {
    j = json{{"seed", p.seed},
             {"jobs", p.jobs},
             {"B", p.B},
             {"constants", p.constants},
             {"earth", p.earth},
             {"synth_n", p.synth_n},
             {"synth", p.synth},
             {"prune", p.prune},
             {"transcribe", p.transcribe},
             {"chains", p.chains},
             {"refine_chains", p.refine_chains},
             {"table", p.table},
             {"dispatch", p.dispatch},
             {"sweep_radii", p.sweep_radii},
             {"refine", p.refine},
             {"validate", p.validate}};
}

inline void from_json(const json& j, PipelineConfig& p) {
    static const std::set<std::string> known{"seed",   "jobs",          "B",     "constants", "earth",       "synth_n",
                                             "synth",  "prune",         "transcribe", "chains", "refine_chains",
                                             "table",  "dispatch",      "sweep_radii", "refine", "validate"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw InputError("config: unknown key '" + k + "'");
    const PipelineConfig d{};
    p.seed = j.value("seed", d.seed);
    p.jobs = j.value("jobs", d.jobs);
    p.B = j.value("B", d.B);
    p.constants = j.value("constants", d.constants);
    p.earth = j.value("earth", d.earth);
    p.synth_n = j.value("synth_n", d.synth_n);
    p.synth = j.value("synth", d.synth);
    p.prune = j.value("prune", d.prune);
    p.transcribe = j.value("transcribe", d.transcribe);
    p.chains = j.value("chains", d.chains);
    p.refine_chains = j.value("refine_chains", d.refine_chains);
    p.table = j.value("table", d.table);
    p.dispatch = j.value("dispatch", d.dispatch);
    p.sweep_radii = j.value("sweep_radii", d.sweep_radii);
    p.refine = j.value("refine", d.refine);
    p.validate = j.value("validate", d.validate);
    if (!p.constants.valid()) throw InputError("config: invalid constants");
}

/// Settings for a few-hundred-asteroid synthetic catalog: looser per-leg
/// cap, dt relaxation and small per-station counts, since the catalog is far
/// sparser than the full pruned set.
inline PipelineConfig desk_scale_config(std::size_t n = 500, int ships = 2) {
    PipelineConfig cfg;
    cfg.synth_n = n;
    cfg.chains.ships = ships;
    cfg.chains.relax_days = 30.0;
    cfg.chains.rules.dv_a2a_max = 3.0;
    cfg.dispatch.na_lo = 1;
    cfg.dispatch.na_hi = 4;
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) { return read_json(path).get<PipelineConfig>(); }

/// Stage seeds derived from the global seed.
inline std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) { return seed * 1000003ULL + stage; }

// ------------------------------------------------------------------ stages

inline TranscriptionParams run_transcribe(const Catalog& cat, const PipelineConfig& cfg) {
    if (!cfg.transcribe.search) return cfg.transcribe.params;
    GaParams ga = cfg.transcribe.ga;
    ga.seed = stage_seed(cfg.seed, 1);
    ga.jobs = cfg.jobs;
    const auto r = transcribe(cat, ga, cfg.transcribe.bounds, cfg.chains.bw, cfg.chains.ships, cfg.chains.spacing_days,
                              cfg.chains.rules, cfg.earth, cfg.constants);
    log::info("transcribe: dt_e2a ", r.params.dt_e2a, " dt_a2a ", r.params.dt_a2a, " a_D ", r.params.a_D, " J ", r.J);
    return r.params;
}

inline std::vector<MothershipChain> run_chains(const Catalog& cat, const TranscriptionParams& p, const PipelineConfig& cfg) {
    RingConfig ring;
    ring.a_D = p.a_D;
    ChainContext ctx(cat, ring, cfg.chains.rules, cfg.earth, cfg.constants);
    ctx.jobs = cfg.jobs;
    const auto camp = build_campaign(ctx, p, cfg.chains.bw, cfg.chains.ships, cfg.chains.spacing_days, cfg.chains.relax_days);
    std::vector<MothershipChain> out;
    for (const auto& s : camp.ships) out.push_back(s.chain);
    return out;
}

struct ChainRefineResult {
    std::vector<MothershipChain> r1, r2;
    RingConfig ring;
};

inline ChainRefineResult run_refine_chains(const Catalog& cat, const std::vector<MothershipChain>& chains,
                                           const RingConfig& ring0, const PipelineConfig& cfg) {
    ChainRefineResult r;
    const ChainGeometry g{&cat, cfg.earth, cfg.constants};
    const auto est = estimate_ring_transfers(cat, ring0, cfg.constants);
    r.r1.resize(chains.size());
    parallel_for(chains.size(), cfg.jobs, [&](std::size_t i) {
        EpochRefineParams p = cfg.refine_chains.epochs;
        p.pso.seed = stage_seed(cfg.seed, 10 + i);
        r.r1[i] = refine_epochs(g, chains[i], est, p).chain;
    });
    r.ring = ring0;
    if (cfg.refine_chains.ring && !r.r1.empty()) {
        PsoParams pso = cfg.refine_chains.ring_pso;
        pso.seed = stage_seed(cfg.seed, 2);
        r.ring = refine_ring(cat, r.r1, ring0, pso, cfg.refine_chains.ring_bounds, cfg.constants);
    }
    r.r2.resize(r.r1.size());
    parallel_for(r.r1.size(), cfg.jobs, [&](std::size_t i) { r.r2[i] = apply_r2(g, r.r1[i]); });
    return r;
}

inline RendezvousTable run_table(const Catalog& cat, const std::vector<MothershipChain>& chains, const RingConfig& ring,
                                 const PipelineConfig& cfg) {
    TableParams p = cfg.table;
    p.jobs = cfg.jobs;
    p.shoot.seed = stage_seed(cfg.seed, 3);
    return build_table(chains, ring, cat, p, cfg.constants);
}

inline DispatchParams dispatch_params(const PipelineConfig& cfg) {
    DispatchParams p = cfg.dispatch;
    p.seed = stage_seed(cfg.seed, 4);
    p.jobs = cfg.jobs;
    return p;
}

inline DispatchReport run_dispatch(const RendezvousTable& table, const std::vector<MothershipChain>& chains,
                                   const RingConfig& ring, const PipelineConfig& cfg) {
    const DispatchProblem p(table, chains, ring.a_D, cfg.dispatch.n_stations, cfg.constants);
    return dispatch(p, dispatch_params(cfg));
}

struct FinalRefineResult {
    RendezvousRefineReport rendezvous;
    std::vector<MothershipChain> trimmed;  // after dropping asteroids lost in refinement
    DsmPassReport dsm;
    MissionSolution solution;
};

inline FinalRefineResult run_final_refine(const DispatchReport& d, const RendezvousTable& table, const Catalog& cat,
                                          const RingConfig& ring, const PipelineConfig& cfg) {
    FinalRefineResult r;
    lowthrust::ShootingOptions shoot = cfg.refine.shoot;
    shoot.seed = stage_seed(cfg.seed, 5);
    r.rendezvous = refine_assignment(d.assignment, table, cat, ring, shoot, cfg.jobs, cfg.constants);
    r.trimmed = trim_chains(d.chains, r.rendezvous.assignment);
    const ChainGeometry g{&cat, cfg.earth, cfg.constants};
    r.dsm = apply_dsm_pass(g, r.trimmed, r.rendezvous.assignment.assigned(), cfg.refine.dsm, cfg.jobs);
    r.solution = make_solution(ring, r.dsm.chains, r.rendezvous.assignment);
    return r;
}

// ---------------------------------------------------------------- pipeline

/// Per-ship cost after each stage (0 once a ship has been trimmed away).
struct StageDv {
    int ship = 0;
    double bs = 0.0, r1 = 0.0, r2 = 0.0, trim = 0.0, dsm = 0.0;

    bool monotone(double tol = 1e-9) const {
        return bs + tol >= r1 && r1 + tol >= r2 && r2 + tol >= trim && trim + tol >= dsm;
    }
};

struct PipelineResult {
    TranscriptionParams params;
    std::vector<MothershipChain> chains_bs;
    ChainRefineResult refined;
    RendezvousTable table;
    DispatchReport dispatch;
    std::vector<SweepRow> sweep;
    FinalRefineResult final;
    ValidationReport validation;
    double J = 0.0;
    std::vector<StageDv> dv;
    std::map<std::string, double> seconds;
};

namespace pipeline_detail {

inline double ship_dv(const std::vector<MothershipChain>& chains, int ship, const Constants& c) {
    for (const auto& ch : chains)
        if (ch.ship == ship) return chain_dv(ch, c);
    return 0.0;
}

}  // namespace pipeline_detail

/// Runs every stage on a pruned catalog. `on_stage` is told when each stage ends.
inline PipelineResult run_pipeline(const Catalog& cat, const PipelineConfig& cfg,
                                   const std::function<void(const std::string&, double)>& on_stage = {}) {
    using clock = std::chrono::steady_clock;
    PipelineResult r;
    auto t = clock::now();
    auto done = [&](const char* stage) {
        const double s = std::chrono::duration<double>(clock::now() - t).count();
        r.seconds[stage] = s;
        if (on_stage) on_stage(stage, s);
        t = clock::now();
    };
    const Constants& c = cfg.constants;
    r.params = run_transcribe(cat, cfg);
    done("transcribe");
    r.chains_bs = run_chains(cat, r.params, cfg);
    if (r.chains_bs.empty()) throw InfeasibleError("pipeline: no mothership chain could be built");
    done("chains");
    RingConfig ring0;
    ring0.a_D = r.params.a_D;
    ring0.n_stations = cfg.dispatch.n_stations;
    ring0.phase_ref_mjd = c.t_start_mjd;
    r.refined = run_refine_chains(cat, r.chains_bs, ring0, cfg);
    done("refine-chains");
    r.table = run_table(cat, r.refined.r2, r.refined.ring, cfg);
    done("table");
    r.dispatch = run_dispatch(r.table, r.refined.r2, r.refined.ring, cfg);
    done("dispatch");
    if (!cfg.sweep_radii.empty()) {
        std::vector<std::pair<double, RendezvousTable>> tables{{r.refined.ring.a_D, r.table}};
        for (double a : cfg.sweep_radii) {
            RingConfig ring = r.refined.ring;
            ring.a_D = a;
            tables.emplace_back(a, run_table(cat, r.refined.r2, ring, cfg));
        }
        r.sweep = sweep(tables, r.refined.r2, dispatch_params(cfg), c);
        done("sweep");
    }
    r.final = run_final_refine(r.dispatch, r.table, cat, r.refined.ring, cfg);
    done("refine");
    r.validation = validate(r.final.solution, cat, cfg.validation_options(), c);
    r.J = score(r.final.solution, cfg.B, c);
    done("validate");
    for (std::size_t i = 0; i < r.chains_bs.size(); ++i) {
        StageDv s;
        s.ship = r.chains_bs[i].ship;
        s.bs = chain_dv(r.chains_bs[i], c);
        s.r1 = chain_dv(r.refined.r1[i], c);
        s.r2 = chain_dv(r.refined.r2[i], c);
        s.trim = pipeline_detail::ship_dv(r.final.trimmed, s.ship, c);
        s.dsm = pipeline_detail::ship_dv(r.final.solution.chains, s.ship, c);
        r.dv.push_back(s);
    }
    return r;
}

}  // namespace dyson
