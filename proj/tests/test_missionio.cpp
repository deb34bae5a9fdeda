#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dyson/chain/refine.hpp"
#include "dyson/mission/missionio.hpp"
#include "support/mission_fixture.hpp"

using namespace dyson;
using namespace dyson::oracle;

namespace {

std::string text_of(const MissionSolution& s) {
    std::ostringstream os;
    write_solution(os, s);
    return os.str();
}

}  // namespace

TEST(Score, ReproducesPublishedFinalScore) {
    MissionSolution sol;
    sol.ring.a_D = 1.05;
    sol.transfers = {{1, 1, Epoch(96000), Epoch(96100), 1.2767e15, {}}};
    sol.ring.n_stations = 1;
    for (double dv : {18.96, 17.04, 20.62, 18.84, 21.25, 18.75, 18.46, 22.27, 17.98, 20.69}) {
        MothershipChain ch;
        ChainLeg l{};
        l.dv1 = Vec3(dv, 0, 0);
        ch.legs.push_back(l);
        sol.chains.push_back(ch);
    }
    EXPECT_NEAR(score(sol), 5992.3, 5992.3 * 5e-4);
}

TEST(Score, ZeroMinimumMassGivesZero) {
    auto sol = base().sol;
    EXPECT_EQ(sol.min_station_mass(), 0.0);  // ten stations receive nothing
    EXPECT_EQ(score(sol), 0.0);
    sol.ring.n_stations = 2;
    sol.transfers[0].station = 1;
    sol.transfers[1].station = 2;
    EXPECT_GT(score(sol), 0.0);
    sol.transfers.pop_back();
    EXPECT_EQ(score(sol), 0.0);
}

TEST(Score, MonotoneAndOrderInvariant) {
    MissionSolution sol;
    sol.ring = planar_ring(1.1);
    sol.ring.n_stations = 2;
    sol.transfers = {{1, 1, Epoch(96000), Epoch(96100), 3e14, {}}, {2, 2, Epoch(96000), Epoch(96300), 5e14, {}}};
    for (double dv : {3.3, 11.7, 0.9, 7.25}) {
        MothershipChain ch;
        ChainLeg l{};
        l.dv1 = Vec3(0, dv, 0);
        ch.legs.push_back(l);
        sol.chains.push_back(ch);
    }
    const double J = score(sol);
    EXPECT_NEAR(J, 1e-10 * 3e14 / (1.21 * (std::pow(1 + 3.3 / 50, 2) + std::pow(1 + 11.7 / 50, 2) +
                                           std::pow(1 + 0.9 / 50, 2) + std::pow(1 + 7.25 / 50, 2))),
                1e-12 * J);
    auto doubled = sol;
    for (auto& ch : doubled.chains) ch.legs[0].dv1 *= 2.0;
    EXPECT_LT(score(doubled), J);
    auto shuffled = sol;
    std::reverse(shuffled.chains.begin(), shuffled.chains.end());
    std::swap(shuffled.chains[0], shuffled.chains[2]);
    EXPECT_EQ(score(shuffled), J);
}

TEST(Score, LaunchExcessAboveCapIsCounted) {
    MissionSolution sol;
    sol.ring.n_stations = 1;
    sol.transfers = {{1, 1, Epoch(96000), Epoch(96100), 1e15, {}}};
    MothershipChain ch;
    ch.legs.push_back(ChainLeg{});
    ch.launch_impulse = Vec3(5.9, 0, 0);
    sol.chains = {ch};
    EXPECT_DOUBLE_EQ(mission_dv(sol)[0], 0.0);
    sol.chains[0].launch_impulse = Vec3(0, 0, 6.5);
    EXPECT_NEAR(mission_dv(sol)[0], 0.5, 1e-12);
}

TEST(Validate, ConstructedMissionPassesEveryCheck) {
    const auto& f = base();
    const auto rep = validate(f.sol, f.cat);
    std::ostringstream os;
    write_report(os, rep);
    EXPECT_TRUE(rep.pass()) << os.str();
    EXPECT_EQ(rep.checks.size(), 12u);
    EXPECT_NEAR(rep.check("station_gap").margin, 10.0, 0.01);
    ValidationOptions par;
    par.jobs = 4;
    const auto rep4 = validate(f.sol, f.cat, par);
    for (std::size_t i = 0; i < rep.checks.size(); ++i) EXPECT_EQ(rep.checks[i].margin, rep4.checks[i].margin);
}

TEST(Validate, WindowOnly) {
    const auto f = window_only();
    EXPECT_EQ(failures(f), (std::vector<std::string>{"window"}));
    EXPECT_NEAR(validate(f.sol, f.cat).check("window").margin, -20.0, 1e-9);
}

TEST(Validate, AtdDelayOnly) {
    const auto f = atd_delay_only();
    EXPECT_EQ(failures(f), (std::vector<std::string>{"atd_delay"}));
    EXPECT_NEAR(validate(f.sol, f.cat).check("atd_delay").margin, -10.0, 0.01);
}

TEST(Validate, RendezvousOnly) { EXPECT_EQ(failures(rendezvous_only()), (std::vector<std::string>{"rendezvous"})); }

TEST(Validate, MassOnly) { EXPECT_EQ(failures(mass_only()), (std::vector<std::string>{"mass"})); }

TEST(Validate, StationGapOnlyByOneDay) {
    const auto f = station_gap_only();
    const auto rep = validate(f.sol, f.cat);
    EXPECT_EQ(rep.failed(), (std::vector<std::string>{"station_gap"}));
    const auto& c = rep.check("station_gap");
    ASSERT_EQ(c.violations.size(), 1u);
    EXPECT_NEAR(c.margin, -1.0, 0.01);
}

TEST(Validate, PerihelionOnly) {
    const auto f = perihelion_only();
    const auto rep = validate(f.sol, f.cat);
    EXPECT_EQ(rep.failed(), (std::vector<std::string>{"perihelion"}));
    EXPECT_LE(rep.check("perihelion").margin, -0.01 + 1e-9);
}

TEST(Validate, RingRadiusOnly) {
    const auto f = ring_radius_only();
    EXPECT_EQ(failures(f), (std::vector<std::string>{"ring_radius"}));
    EXPECT_NEAR(validate(f.sol, f.cat).check("ring_radius").margin, -0.03, 1e-12);
}

TEST(Validate, SupportingChecksCatchBrokenChains) {
    auto f = base();
    f.sol.chains[0].legs[0].dv1 *= 0.5;
    f.sol.chains[0].legs[0].dv2 += f.sol.chains[0].legs[0].dv1;  // keeps the departure velocity
    auto fails = failures(f);
    EXPECT_EQ(fails, (std::vector<std::string>{"flyby_speed"}));
    f = base();
    f.sol.chains[0].legs[1].v_depart[0] += 1e-3;
    EXPECT_EQ(failures(f), (std::vector<std::string>{"continuity"}));
    f = base();
    f.sol.transfers.push_back(f.sol.transfers.front());
    fails = failures(f);
    EXPECT_NE(std::find(fails.begin(), fails.end(), "consistency"), fails.end());
    f = base();
    f.sol.build_order.pop_back();
    EXPECT_EQ(failures(f), (std::vector<std::string>{"consistency"}));
}

TEST(Validate, LowThrustRadiusRefinedBetweenSamples) {
    // Eccentric conic sampled daily: the refinement recovers the true perihelion.
    const KeplerianElements el{0.8, 0.45, 0.1, 0.2, 0.3, 3.0, Epoch(96000.0)};
    std::vector<lowthrust::ArcSample> s;
    for (double d = 0.0; d <= 200.0; d += 1.0) {
        lowthrust::ArcSample a;
        a.t = Epoch(96000.3 + d);
        a.x = cart_to_mee(propagate_kepler(el, a.t, C), C);
        s.push_back(a);
    }
    double coarse = INFINITY;
    for (const auto& a : s) coarse = std::min(coarse, mee_to_cart(a.x, C).r.norm());
    const double exact = 0.8 * (1 - 0.45) * C.au;
    const double refined = missionio_detail::sampled_min_radius(s, C);
    EXPECT_GT(coarse - exact, 1e3);
    EXPECT_NEAR(refined, exact, 1e-6 * exact);
}

TEST(SolutionFile, RoundTripIsLossless) {
    auto sol = base().sol;
    sol.chains[0].legs[1].dsm = Dsm{Epoch(96600.25), Vec3(1.1e8, -3.3e7, 1.7e6), Vec3(0.1, -0.02, 1e-5)};
    const std::string a = text_of(sol);
    std::istringstream is(a);
    const auto back = read_solution(is);
    EXPECT_EQ(text_of(back), a);
    EXPECT_EQ(back.transfers.size(), sol.transfers.size());
    EXPECT_EQ(back.chains[0].legs[1].dsm->r, sol.chains[0].legs[1].dsm->r);
    EXPECT_EQ(back.chains[0].legs[0].v_depart, sol.chains[0].legs[0].v_depart);
    EXPECT_EQ(back.transfers[1].lam0, sol.transfers[1].lam0);
    EXPECT_EQ(score(back), score(sol));
}

TEST(SolutionFile, TruncatedFileReportsExactLine) {
    const std::string text = text_of(base().sol);
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    // Cut the flyby line of leg 2 in the middle of its velocity.
    std::size_t flyby = 0;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (lines[i].find(" flyby 8 ") != std::string::npos) flyby = i;
    ASSERT_GT(flyby, 0u);
    std::string cut;
    for (std::size_t i = 0; i < flyby; ++i) cut += lines[i] + "\n";
    cut += lines[flyby].substr(0, lines[flyby].size() / 2);
    std::istringstream is(cut);
    try {
        read_solution(is);
        FAIL() << "no error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), flyby + 1);
    }
    std::istringstream whole_lines(cut.substr(0, cut.rfind('\n') + 1));
    EXPECT_THROW(read_solution(whole_lines), ParseError);
}

TEST(SolutionFile, MalformedRecordsRejected) {
    auto bad = [](const std::string& s, std::size_t line) {
        std::istringstream is(s);
        try {
            read_solution(is);
            ADD_FAILURE() << "accepted: " << s;
        } catch (const ParseError& e) {
            EXPECT_EQ(e.line(), line) << s;
        }
    };
    bad("ring 1 0 0 0 12 95739\norder 1\nwarp 3\n", 3);
    bad("ring 1 0 0 0 12 95739\nchain 1\n96000 impulse 0 0 0\n", 3);
    bad("ring 1 0 0 0 12 95739\nchain 1\n96000 launch 0 0 0 1 2 3\n96100 flyby 4 0 0 0\n", 4);
    bad("ring 1 0 0\n", 1);
    bad("order 1 2\n", 2);
    bad("ring 1 0 0 0 12 95739\norder 1\ntransfer 1 2 96000 96100 1e14 0 0 0 0 0 x\n", 3);
}

TEST(SolutionFile, EpochOutsideWindowLoadsThenFailsValidation) {
    auto f = base();
    std::string text = text_of(f.sol);
    std::istringstream is(text);
    auto sol = read_solution(is);
    sol.transfers[0].tf = Epoch(C.t_end_mjd() + 5.0);
    std::istringstream is2(text_of(sol));
    f.sol = read_solution(is2);
    const auto fails = failures(f);
    EXPECT_NE(std::find(fails.begin(), fails.end(), "window"), fails.end());
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::size_t columns(const std::string& l) { return static_cast<std::size_t>(std::count(l.begin(), l.end(), ',')) + 1; }

}  // namespace

TEST(Plots, HeadersColumnsAndDeterminism) {
    const auto& f = base();
    const auto dir = std::filesystem::temp_directory_path() / "dyson_plots_test";
    std::filesystem::remove_all(dir);
    PlotInputs in;
    in.history = {{1e14, 2e14, 7, 0, 3}, {2e14, 2.5e14, 8, 3, 4}};
    in.sweep = {{1.0, 10.0, 12.0, 91.0, 20}, {1.1, 11.0, 13.0, 92.0, 21}};
    const auto files = emit_plots(f.sol, f.cat, (dir / "a").string(), in);
    emit_plots(f.sol, f.cat, (dir / "b").string(), in);
    const std::map<std::string, std::string> headers{
        {"mass_vs_arrival.csv", "asteroid,station,tf_mjd,m_f_kg"},
        {"rebalance_trace.csv", "iteration,m_min_kg,m_mean_kg,moved,from,to"},
        {"station_counts.csv", "station,build_position,count,mass_kg"},
        {"radius_sweep.csv", "a_D_au,mean_J,best_J,best_dt_days,asteroids"},
        {"trajectories.csv", "kind,id,leg,mjd,x_km,y_km,z_km"}};
    ASSERT_EQ(files.size(), headers.size());
    for (const auto& name : files) {
        const auto a = read_lines(dir / "a" / name);
        ASSERT_FALSE(a.empty()) << name;
        EXPECT_EQ(a[0], headers.at(name));
        for (const auto& l : a) EXPECT_EQ(columns(l), columns(a[0])) << name;
        EXPECT_EQ(a, read_lines(dir / "b" / name)) << name;
    }
    EXPECT_EQ(read_lines(dir / "a" / "station_counts.csv").size(), 13u);
    EXPECT_EQ(read_lines(dir / "a" / "mass_vs_arrival.csv").size(), 3u);
    EXPECT_GT(read_lines(dir / "a" / "trajectories.csv").size(), 100u);
    std::filesystem::remove_all(dir);
}
