#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "dyson/dispatch/dispatcher.hpp"
#include "support/dispatch_oracles.hpp"

using namespace dyson;
using namespace dyson::oracle;

TEST(DecodeOrder, SortedAndReversed) {
    EXPECT_EQ(decode_station_order({0.1, 0.2, 0.3, 0.4}), (std::vector<int>{1, 2, 3, 4}));
    EXPECT_EQ(decode_station_order({0.4, 0.3, 0.2, 0.1}), (std::vector<int>{4, 3, 2, 1}));
    EXPECT_EQ(decode_station_order({0.5, 0.2, 0.5, 0.2}), (std::vector<int>{2, 4, 1, 3}));
}

TEST(DecodeOrder, MatchesReferenceArgsort) {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(12);
        for (auto& v : x) v = u(g);
        std::vector<std::pair<double, int>> ref;
        for (int i = 0; i < 12; ++i) ref.push_back({x[static_cast<std::size_t>(i)], i + 1});
        std::sort(ref.begin(), ref.end());
        std::vector<int> expect;
        for (auto& r : ref) expect.push_back(r.second);
        EXPECT_EQ(decode_station_order(x), expect);
    }
}

TEST(FirstAllocation, TakesEarliestArrivals) {
    RendezvousTable t;
    t.set_n_stations(1);
    t.add(opp(1, 1, 96300, 5e14));
    t.add(opp(2, 1, 96100, 4e14));
    t.add(opp(3, 1, 96200, 3e14));
    t.add(opp(3, 1, 96050, 2e14));
    t.sort();
    const DispatchProblem p(t, {}, 1.0, 1);
    const auto a = first_allocation(p, decision({0.5}, {2}, 90.0));
    ASSERT_EQ(a.stations[0].size(), 2u);
    EXPECT_EQ(a.stations[0][0].asteroid, 3);
    EXPECT_EQ(a.stations[0][0].opp.tf.mjd, 96050);
    EXPECT_EQ(a.stations[0][1].asteroid, 2);
}

TEST(FirstAllocation, IneligibleSecondStationStaysEmpty) {
    RendezvousTable t;
    t.set_n_stations(2);
    t.add(opp(1, 1, 96500, 5e14));
    t.add(opp(2, 2, 96400, 5e14));
    t.add(opp(2, 2, 96550, 5e14));
    t.sort();
    const DispatchProblem p(t, {}, 1.0, 2);
    const auto a = first_allocation(p, decision({0.1, 0.9}, {1, 1}, 90.0));
    EXPECT_EQ(a.stations[0].size(), 1u);
    EXPECT_TRUE(a.stations[1].empty());
    EXPECT_EQ(evaluate_decision(p, decision({0.1, 0.9}, {1, 1}, 90.0)).J, 0.0);
}

TEST(FirstAllocation, MatchesProceduralOracle) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> na(0, 4);
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const int n_ast = 3 + static_cast<int>(seed % 6);
        const auto t = random_table(n_ast, 3, 3, seed);
        if (t.asteroids().empty()) continue;
        const DispatchProblem p(t, {}, 1.0, 3);
        const auto d = decision({u(g), u(g), u(g)}, {na(g), na(g), na(g)}, 90.0 + 20.0 * u(g));
        const auto a = first_allocation(p, d);
        const auto b = procedural_first(t, d, 3);
        EXPECT_EQ(a.order, b.order);
        EXPECT_EQ(ids_of(a), ids_of(b)) << seed;
        EXPECT_NEAR(a.min_mass(), b.min_mass(), 1e-3);
        EXPECT_TRUE(feasible(a, d.x_dt));
    }
}

TEST(Rebalance, BalancedInputIsFixedPoint) {
    RendezvousTable t;
    t.set_n_stations(2);
    t.add(opp(1, 1, 96100, 5e14));
    t.add(opp(2, 2, 96300, 5e14));
    t.add(opp(1, 2, 96400, 5e14));
    t.sort();
    const DispatchProblem p(t, {}, 1.0, 2);
    const auto d = decision({0.1, 0.9}, {1, 1}, 90.0);
    const auto a = first_allocation(p, d);
    const auto b = rebalance(a, p, d);
    EXPECT_EQ(ids_of(a), ids_of(b));
}

TEST(Rebalance, MonotoneFeasibleAndLocallyOptimal) {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> na(1, 5);
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto t = random_table(8, 3, 3, 100 + seed);
        const DispatchProblem p(t, {}, 1.0, 3);
        const auto d = decision({u(g), u(g), u(g)}, {na(g), na(g), na(g)}, 90.0 + 10.0 * u(g));
        const auto a = first_allocation(p, d);
        std::vector<RebalanceStep> h;
        const auto b = rebalance(a, p, d, &h);
        EXPECT_TRUE(feasible(b, d.x_dt)) << seed;
        for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i].m_min, h[i - 1].m_min) << seed;
        EXPECT_GE(b.min_mass(), a.min_mass());
        EXPECT_LE(best_single_move(b, t, d.x_dt), b.min_mass() * (1 + 1e-12)) << seed;
        if (b.min_mass() > a.min_mass()) ++improved;
    }
    EXPECT_GT(improved, 10);
}

TEST(Rebalance, BoundedByExhaustiveReallocation) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto t = random_table(5, 2, 2, 500 + seed);
        const DispatchProblem p(t, {}, 1.0, 2);
        const auto d = decision({0.2, 0.7}, {2, 2}, 90.0);
        const auto a = first_allocation(p, d);
        const auto b = rebalance(a, p, d);
        const double opt = exhaustive_min_mass(t, a.order, d.x_dt);
        EXPECT_GE(b.min_mass(), a.min_mass());
        EXPECT_LE(b.min_mass(), opt * (1 + 1e-12));
    }
}

TEST(Trim, AllAssignedUnchanged) {
    RendezvousTable t;
    t.set_n_stations(1);
    t.add(opp(1, 1, 96100, 5e14));
    t.add(opp(2, 1, 96200, 5e14));
    t.sort();
    const DispatchProblem p(t, {chain_of({1, 2}, 1.0)}, 1.0, 1);
    const auto r = evaluate_decision(p, decision({0.5}, {2}, 90.0));
    ASSERT_EQ(r.chains.size(), 1u);
    EXPECT_EQ(r.chains[0].ids(), (std::vector<std::int64_t>{1, 2}));
    EXPECT_DOUBLE_EQ(r.chain_dv[0], chain_dv(p.chains()[0]));
}

TEST(Trim, UnassignedTailRemoved) {
    Assignment a;
    a.order = {1};
    a.stations = {{Allocation{1, opp(1, 1, 96100, 5e14)}, Allocation{3, opp(3, 1, 96150, 5e14)}}};
    const auto ch = chain_of({1, 2, 3, 4, 5}, 1.0);
    const auto out = trim_chains({ch, chain_of({6, 7}, 1.0)}, a);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].ids(), (std::vector<std::int64_t>{1, 2, 3}));
    EXPECT_LT(chain_dv(out[0]), chain_dv(ch));
    EXPECT_DOUBLE_EQ(chain_dv(out[0]), 5.0);  // 3 arrivals + 2 departures
}

TEST(Objective, EmptyStationGivesZero) {
    EXPECT_EQ(mission_objective(0.0, 1.0, {1.0}), 0.0);
    EXPECT_NEAR(mission_objective(1e15, 1.0, {0.0}), 1e5, 1e-9);
    EXPECT_NEAR(mission_objective(1e15, 2.0, {50.0, 50.0}), 1e5 / 4 / 8, 1e-9);
}

TEST(Evaluate, StationGapSensitivity) {
    // Station 2's only arrival sits 91 days after station 1's.
    RendezvousTable t;
    t.set_n_stations(2);
    t.add(opp(1, 1, 96000, 5e14));
    t.add(opp(2, 2, 96091, 5e14));
    t.sort();
    const DispatchProblem p(t, {chain_of({1, 2}, 1.0)}, 1.0, 2);
    const double J0 = evaluate_decision(p, decision({0.1, 0.9}, {1, 1}, 90.34)).J;
    const double J1 = evaluate_decision(p, decision({0.1, 0.9}, {1, 1}, 91.34)).J;
    EXPECT_GT(J0, 0.0);
    EXPECT_EQ(J1, 0.0);
}

TEST(Evaluate, PureFunction) {
    const auto t = random_table(8, 3, 3, 42);
    const DispatchProblem p(t, {chain_of({1, 2, 3, 4}, 0.5), chain_of({5, 6, 7, 8}, 0.7)}, 1.1, 3);
    const auto d = decision({0.3, 0.1, 0.7}, {3, 2, 3}, 92.0);
    const auto a = evaluate_decision(p, d), b = evaluate_decision(p, d);
    EXPECT_EQ(a.J, b.J);
    EXPECT_EQ(ids_of(a.assignment), ids_of(b.assignment));
    double den = 0;
    for (double v : a.chain_dv) den += (1 + v / 50) * (1 + v / 50);
    EXPECT_DOUBLE_EQ(a.J, a.m_min > 0 ? 1e-10 * a.m_min / (1.1 * 1.1 * den) : 0.0);
}

TEST(Dispatch, ZeroWidthBoundsReturnThatDecision) {
    const auto t = random_table(8, 3, 3, 7);
    const DispatchProblem p(t, {chain_of({1, 2, 3, 4, 5, 6, 7, 8}, 0.5)}, 1.0, 3);
    DispatchParams prm;
    prm.n_stations = 3;
    prm.na_lo = prm.na_hi = 3;
    prm.dt_lo = prm.dt_hi = 95.0;
    prm.pso.swarm = 10;
    prm.pso.iters = 5;
    const auto r = dispatch(p, prm);
    const auto ref = evaluate_decision(p, decision(r.decision.x_S, {3, 3, 3}, 95.0));
    EXPECT_EQ(r.decision.x_NA, (std::vector<int>{3, 3, 3}));
    EXPECT_EQ(r.J, ref.J);
}

TEST(Dispatch, DeterministicForFixedSeed) {
    const auto t = random_table(8, 3, 3, 9);
    const DispatchProblem p(t, {chain_of({1, 2, 3, 4, 5, 6, 7, 8}, 0.5)}, 1.0, 3);
    DispatchParams prm;
    prm.n_stations = 3;
    prm.na_lo = 1;
    prm.na_hi = 4;
    prm.optimizer = "ga+pso";
    prm.ga.pop = 20;
    prm.ga.generations = 10;
    prm.pso.swarm = 20;
    prm.pso.iters = 10;
    prm.seeds = 2;
    const auto a = dispatch(p, prm);
    prm.jobs = 2;
    const auto b = dispatch(p, prm);
    EXPECT_EQ(a.J, b.J);
    EXPECT_EQ(a.seed_J, b.seed_J);
    EXPECT_EQ(point_from_decision(a.decision), point_from_decision(b.decision));
}

TEST(Dispatch, WithinFivePercentOfExhaustiveOptimum) {
    for (std::uint64_t seed : {21u, 22u, 23u, 24u}) {
        const auto t = random_table(8, 3, 3, seed);
        const DispatchProblem p(t, {chain_of({1, 2, 3, 4}, 0.8), chain_of({5, 6, 7, 8}, 0.4)}, 1.0, 3);
        DispatchParams prm;
        prm.n_stations = 3;
        prm.na_lo = 1;
        prm.na_hi = 4;
        prm.dt_lo = 90.0;
        prm.dt_hi = 120.0;
        prm.pso.swarm = 60;
        prm.pso.iters = 80;
        prm.pso.stall_limit = 30;
        prm.seeds = 2;
        prm.seed = seed;
        const auto r = dispatch(p, prm);
        const double best = exhaustive_best_J(p, t, 1, 4, 90.0, 120.0);
        ASSERT_GT(best, 0.0);
        EXPECT_GE(r.J, 0.95 * best) << seed;
        EXPECT_LE(r.J, best * (1 + 1e-12)) << seed;
        EXPECT_TRUE(feasible(r.assignment, r.decision.x_dt));
    }
}

TEST(Dispatch, RejectsBadInput) {
    const auto t = random_table(4, 3, 2, 1);
    EXPECT_THROW(DispatchProblem(RendezvousTable{}, {}, 1.0, 3), InputError);
    const DispatchProblem p(t, {}, 1.0, 3);
    DispatchParams prm;
    prm.n_stations = 3;
    prm.dt_lo = 80.0;
    EXPECT_THROW(dispatch(p, prm), InputError);
    prm.dt_lo = 90.0;
    prm.optimizer = "annealing";
    EXPECT_THROW(dispatch(p, prm), InputError);
    EXPECT_THROW(first_allocation(p, decision({0.1, 0.2}, {1, 1}, 90.0)), InputError);
}
