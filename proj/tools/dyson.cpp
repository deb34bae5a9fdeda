// dyson: command-line front end for every pipeline stage.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dyson/mission/pipeline.hpp"

using namespace dyson;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::string log_level = "info";
};

PipelineConfig resolve(const Globals& g) {
    static const std::map<std::string, log::Level> levels{{"debug", log::Level::debug}, {"info", log::Level::info},
                                                          {"warn", log::Level::warn},   {"error", log::Level::error},
                                                          {"off", log::Level::off}};
    log::set_level(levels.at(g.log_level));
    PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (g.jobs) cfg.jobs = *g.jobs;
    return cfg;
}

std::vector<double> parse_list(const std::string& s, std::size_t n, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != tok.size()) throw InputError(what + ": bad number '" + tok + "'");
        out.push_back(v);
    }
    if (out.size() != n) throw InputError(what + ": expected " + std::to_string(n) + " comma-separated values");
    return out;
}

PruneBounds parse_prune(const std::string& s, PruneBounds b) {
    if (s.empty()) return b;
    const auto v = parse_list(s, 4, "--prune");
    return {v[0], v[1], v[2] * kDeg, v[3]};
}

RingConfig load_ring(const std::string& path) { return read_json(path).get<RingConfig>(); }
void save_ring(const std::string& path, const RingConfig& r) { write_json(path, json(r)); }

ChainFile load_chains(const std::string& path) { return json_chain_file(read_json(path)); }
void save_chains(const std::string& path, const ChainFile& f) { write_json(path, chain_file_json(f)); }

void save_text(const std::string& path, const std::string& s) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << s;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void log_chains(const char* stage, const std::vector<MothershipChain>& chains, const Constants& c) {
    for (const auto& ch : chains)
        log::info(stage, ": ship ", ch.ship, " flybys ", ch.legs.size(), " dv ", chain_dv(ch, c), " km/s");
}

std::string stage_dv_csv(const std::vector<StageDv>& dv) {
    std::ostringstream os;
    os << "ship,bs,r1,r2,trim,dsm\n";
    for (const auto& s : dv)
        os << s.ship << ',' << fmt(s.bs) << ',' << fmt(s.r1) << ',' << fmt(s.r2) << ',' << fmt(s.trim) << ','
           << fmt(s.dsm) << '\n';
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "a_D,mean_J,best_J,best_dt,asteroids\n";
    for (const auto& r : rows)
        os << fmt(r.a_D) << ',' << fmt(r.mean_J) << ',' << fmt(r.best_J) << ',' << fmt(r.best_dt) << ',' << r.asteroids
           << '\n';
    return os.str();
}

json dispatch_file(const DispatchReport& d, const RingConfig& ring) {
    json j = dispatch_json(d);
    j["ring"] = ring;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dyson ring mission design pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON file with numeric settings")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--log", g.log_level, "debug, info, warn, error or off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    int status = 0;

    // synth
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic catalog");
    std::size_t synth_n = 0;
    std::string synth_out;
    synth->add_option("--n", synth_n, "Number of asteroids (default from config)");
    synth->add_option("--out", synth_out, "Catalog path")->required();
    synth->callback([&] {
        const auto cfg = resolve(g);
        save_catalog(synth_out, synth_catalog(synth_n ? synth_n : cfg.synth_n, cfg.seed, cfg.synth));
    });

    // prune
    auto* prune_cmd = app.add_subcommand("prune", "Keep asteroids inside the pruning box");
    std::string prune_in, prune_out, prune_box;
    prune_cmd->add_option("--catalog", prune_in, "Input catalog")->required()->check(CLI::ExistingFile);
    prune_cmd->add_option("--prune", prune_box, "a_max,e_max,i_max_deg,m_min");
    prune_cmd->add_option("--out", prune_out, "Output catalog")->required();
    prune_cmd->callback([&] {
        const auto cfg = resolve(g);
        const auto in = load_catalog(prune_in);
        const auto out = prune(in, parse_prune(prune_box, cfg.prune));
        log::info("prune: kept ", out.size(), " of ", in.size());
        save_catalog(prune_out, out);
    });

    // transcribe
    auto* tr = app.add_subcommand("transcribe", "Outer search over dt_e2a, dt_a2a and a_D");
    std::string tr_cat, tr_out;
    tr->add_option("--catalog", tr_cat)->required()->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "params.json")->required();
    tr->callback([&] {
        auto cfg = resolve(g);
        cfg.transcribe.search = true;
        const auto p = run_transcribe(load_catalog(tr_cat), cfg);
        write_json(tr_out, json(p));
    });

    // chains
    auto* chains = app.add_subcommand("chains", "Beam search for mothership chains");
    std::string ch_cat, ch_params, ch_params_file, ch_out;
    std::optional<std::size_t> ch_bw;
    std::optional<int> ch_ships;
    chains->add_option("--catalog", ch_cat)->required()->check(CLI::ExistingFile);
    auto* p_opt = chains->add_option("--params", ch_params, "dt_e2a,dt_a2a,a_D");
    chains->add_option("--params-file", ch_params_file, "params.json from transcribe")
        ->check(CLI::ExistingFile)
        ->excludes(p_opt);
    chains->add_option("--bw", ch_bw, "Beam width");
    chains->add_option("--ships", ch_ships, "Number of motherships");
    chains->add_option("--out", ch_out, "chains.json")->required();
    chains->callback([&] {
        auto cfg = resolve(g);
        if (ch_bw) cfg.chains.bw = *ch_bw;
        if (ch_ships) cfg.chains.ships = *ch_ships;
        TranscriptionParams p = cfg.transcribe.params;
        if (!ch_params.empty()) {
            const auto v = parse_list(ch_params, 3, "--params");
            p = {v[0], v[1], v[2]};
        }
        if (!ch_params_file.empty()) p = read_json(ch_params_file).get<TranscriptionParams>();
        const auto out = run_chains(load_catalog(ch_cat), p, cfg);
        log_chains("chains", out, cfg.constants);
        save_chains(ch_out, {p.a_D, out});
    });

    // refine-chains
    auto* rc = app.add_subcommand("refine-chains", "Epoch refinement, ring refinement and flyby re-split");
    std::string rc_in, rc_cat, rc_ring_out, rc_ring_in, rc_out;
    rc->add_option("--in", rc_in, "chains.json")->required()->check(CLI::ExistingFile);
    rc->add_option("--catalog", rc_cat)->required()->check(CLI::ExistingFile);
    rc->add_option("--ring", rc_ring_out, "Refined ring (output)")->required();
    rc->add_option("--ring-in", rc_ring_in, "Starting ring (default: a_D of the chain file)")->check(CLI::ExistingFile);
    rc->add_option("--out", rc_out, "chains_r2.json")->required();
    rc->callback([&] {
        const auto cfg = resolve(g);
        const auto in = load_chains(rc_in);
        RingConfig ring0;
        if (!rc_ring_in.empty()) {
            ring0 = load_ring(rc_ring_in);
        } else {
            ring0.a_D = in.a_D;
            ring0.n_stations = cfg.dispatch.n_stations;
            ring0.phase_ref_mjd = cfg.constants.t_start_mjd;
        }
        const auto r = run_refine_chains(load_catalog(rc_cat), in.chains, ring0, cfg);
        log_chains("refine-chains", r.r2, cfg.constants);
        save_ring(rc_ring_out, r.ring);
        save_chains(rc_out, {r.ring.a_D, r.r2});
    });

    // table
    auto* tb = app.add_subcommand("table", "Rendezvous opportunity table");
    std::string tb_chains, tb_ring, tb_cat, tb_out;
    std::optional<int> tb_n;
    std::optional<double> tb_a;
    tb->add_option("--chains", tb_chains, "chains_r2.json")->required()->check(CLI::ExistingFile);
    tb->add_option("--ring", tb_ring, "ring.json")->required()->check(CLI::ExistingFile);
    tb->add_option("--catalog", tb_cat)->required()->check(CLI::ExistingFile);
    tb->add_option("--n", tb_n, "Start epochs per flyby");
    tb->add_option("--a-D", tb_a, "Override the ring radius (AU), for radius sweeps");
    tb->add_option("--out", tb_out, "table.txt; the ring used goes to <out>.ring.json")->required();
    tb->callback([&] {
        auto cfg = resolve(g);
        if (tb_n) cfg.table.n = *tb_n;
        RingConfig ring = load_ring(tb_ring);
        if (tb_a) ring.a_D = *tb_a;
        if (ring.a_D < cfg.constants.a_d_min_au) throw InputError("table: ring radius below the minimum");
        const auto t = run_table(load_catalog(tb_cat), load_chains(tb_chains).chains, ring, cfg);
        save_table(tb_out, t);
        save_ring(tb_out + ".ring.json", ring);
    });

    // dispatch
    auto* dp = app.add_subcommand("dispatch", "Assign asteroids to stations");
    std::string dp_table, dp_tables, dp_chains, dp_ring, dp_opt, dp_out;
    std::optional<int> dp_seeds;
    auto* dp_t = dp->add_option("--table", dp_table, "table.txt")->check(CLI::ExistingFile);
    auto* dp_ts = dp->add_option("--tables", dp_tables, "Directory of tables (each with <table>.ring.json) for a radius sweep")
                      ->check(CLI::ExistingDirectory);
    dp_t->excludes(dp_ts);
    dp->add_option("--chains", dp_chains, "chains_r2.json")->required()->check(CLI::ExistingFile);
    dp->add_option("--ring", dp_ring, "ring.json (default: <table>.ring.json)")->check(CLI::ExistingFile);
    dp->add_option("--optimizer", dp_opt, "ga, pso or ga+pso")->check(CLI::IsMember({"ga", "pso", "ga+pso"}));
    dp->add_option("--seeds", dp_seeds, "Independent optimizer runs")->check(CLI::PositiveNumber);
    dp->add_option("--out", dp_out, "dispatch.json, or sweep CSV with --tables")->required();
    dp->callback([&] {
        auto cfg = resolve(g);
        if (!dp_opt.empty()) cfg.dispatch.optimizer = dp_opt;
        if (dp_seeds) cfg.dispatch.seeds = *dp_seeds;
        const auto chains_in = load_chains(dp_chains).chains;
        if (!dp_tables.empty()) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(dp_tables))
                if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw InputError("dispatch: no *.txt tables in " + dp_tables);
            std::vector<std::pair<double, RendezvousTable>> tables;
            for (const auto& f : files) tables.emplace_back(load_ring(f.string() + ".ring.json").a_D, load_table(f.string()));
            std::sort(tables.begin(), tables.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            const auto rows = sweep(tables, chains_in, dispatch_params(cfg), cfg.constants);
            save_text(dp_out, sweep_csv(rows));
            return;
        }
        if (dp_table.empty()) throw InputError("dispatch: --table or --tables is required");
        const RingConfig ring = load_ring(dp_ring.empty() ? dp_table + ".ring.json" : dp_ring);
        const auto d = run_dispatch(load_table(dp_table), chains_in, ring, cfg);
        log::info("dispatch: J ", d.J, " m_min ", d.m_min, " kg, ", d.assignment.count(), " asteroids");
        write_json(dp_out, dispatch_file(d, ring));
    });

    // refine
    auto* rf = app.add_subcommand("refine", "Rendezvous refinement and DSM pass");
    std::string rf_disp, rf_chains, rf_table, rf_cat, rf_out;
    rf->add_option("--dispatch", rf_disp, "dispatch.json")->required()->check(CLI::ExistingFile);
    rf->add_option("--chains", rf_chains, "chains_r2.json (default: trimmed chains in dispatch.json)")
        ->check(CLI::ExistingFile);
    rf->add_option("--table", rf_table, "table.txt used by dispatch")->required()->check(CLI::ExistingFile);
    rf->add_option("--catalog", rf_cat)->required()->check(CLI::ExistingFile);
    rf->add_option("--out", rf_out, "Mission solution (text)")->required();
    rf->callback([&] {
        const auto cfg = resolve(g);
        const auto j = read_json(rf_disp);
        auto d = json_dispatch(j);
        const auto ring = j.at("ring").get<RingConfig>();
        if (!rf_chains.empty()) d.chains = trim_chains(load_chains(rf_chains).chains, d.assignment);
        const auto r = run_final_refine(d, load_table(rf_table), load_catalog(rf_cat), ring, cfg);
        log::info("refine: ", r.rendezvous.replaced.size(), " replaced, ", r.rendezvous.dropped.size(), " dropped, ",
                  r.dsm.dsm_count, " DSMs");
        save_solution(rf_out, r.solution);
    });

    // validate
    auto* va = app.add_subcommand("validate", "Check every mission constraint; exit 0 only if all pass");
    std::string va_sol, va_cat;
    std::size_t va_list = 5;
    va->add_option("--solution", va_sol)->required()->check(CLI::ExistingFile);
    va->add_option("--catalog", va_cat)->required()->check(CLI::ExistingFile);
    va->add_option("--max-listed", va_list, "Violations listed per check");
    va->callback([&] {
        const auto cfg = resolve(g);
        const auto rep = validate(load_solution(va_sol), load_catalog(va_cat), cfg.validation_options(), cfg.constants);
        write_report(std::cout, rep, va_list);
        if (!rep.pass()) status = 1;
    });

    // score
    auto* sc = app.add_subcommand("score", "Mission objective");
    std::string sc_sol;
    std::optional<double> sc_B;
    sc->add_option("--solution", sc_sol)->required()->check(CLI::ExistingFile);
    sc->add_option("--B", sc_B, "Score multiplier");
    sc->callback([&] {
        const auto cfg = resolve(g);
        const auto sol = load_solution(sc_sol);
        std::cout << "J " << fmt(score(sol, sc_B.value_or(cfg.B), cfg.constants)) << "\n";
        std::cout << "m_min " << fmt(sol.min_station_mass()) << " kg\n";
        std::cout << "a_D " << fmt(sol.ring.a_D) << " AU\n";
        for (double dv : mission_dv(sol, cfg.constants)) std::cout << "dv " << fmt(dv) << " km/s\n";
    });

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "Run every stage and write all intermediate files");
    std::string pl_cat, pl_out;
    bool pl_plots = true;
    pl->add_option("--catalog", pl_cat, "Input catalog (default: synthetic from config)")->check(CLI::ExistingFile);
    pl->add_option("--out", pl_out, "Output directory")->required();
    pl->add_flag("!--no-plots", pl_plots, "Skip plot data files");
    pl->callback([&] {
        const auto cfg = resolve(g);
        fs::create_directories(pl_out);
        const auto path = [&](const char* name) { return (fs::path(pl_out) / name).string(); };
        const Catalog raw = pl_cat.empty() ? synth_catalog(cfg.synth_n, cfg.seed, cfg.synth) : load_catalog(pl_cat);
        save_catalog(path("catalog.txt"), prune(raw, cfg.prune));
        const Catalog cat = load_catalog(path("catalog.txt"));
        write_json(path("config.json"), json(cfg));
        const auto r = run_pipeline(cat, cfg, [](const std::string& s, double t) { log::info("stage ", s, " ", t, " s"); });
        write_json(path("params.json"), json(r.params));
        save_chains(path("chains.json"), {r.params.a_D, r.chains_bs});
        save_chains(path("chains_r1.json"), {r.params.a_D, r.refined.r1});
        save_chains(path("chains_r2.json"), {r.refined.ring.a_D, r.refined.r2});
        save_ring(path("ring.json"), r.refined.ring);
        save_table(path("table.txt"), r.table);
        write_json(path("dispatch.json"), dispatch_file(r.dispatch, r.refined.ring));
        if (!r.sweep.empty()) save_text(path("sweep.csv"), sweep_csv(r.sweep));
        save_solution(path("mission.txt"), r.final.solution);
        save_text(path("stage_dv.csv"), stage_dv_csv(r.dv));
        std::ostringstream rep;
        write_report(rep, r.validation, 5);
        save_text(path("report.txt"), rep.str());
        if (pl_plots) emit_plots(r.final.solution, cat, path("plots"), {r.dispatch.history, r.sweep, 5.0, cfg.earth},
                                 cfg.constants);
        std::cout << rep.str();
        std::cout << "J " << fmt(r.J) << "\n";
        if (!r.validation.pass()) status = 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return status;
}
