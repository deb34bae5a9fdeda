#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "dyson/catalog/catalog.hpp"
#include "dyson/search/nelder_mead.hpp"
#include "dyson/search/searchkit.hpp"

using namespace dyson;

namespace {
std::string three_lines() {
    return "# test catalog\n"
           "1 95739 1.1 0.05 2.0 10 20 30 1e15\n"
           "2 95739 2.9 0.01 1.0 0 0 0 2e14\n"
           "3 95739 1.5 0.10 5.0 100 200 300 7e13\n";
}
}  // namespace

TEST(Catalog, LoadsThreeRecords) {
    std::istringstream in(three_lines());
    const auto cat = parse_catalog(in);
    ASSERT_EQ(cat.size(), 3u);
    EXPECT_NEAR(cat.at(1).elements.i, 2.0 * kDeg, 1e-15);
    EXPECT_NEAR(cat.at(3).elements.M0, 300.0 * kDeg, 1e-14);
    EXPECT_EQ(cat.at(2).m0, 2e14);
}

TEST(Catalog, DuplicateIdNamesTheId) {
    std::istringstream in("1 95739 1.1 0.05 2 10 20 30 1e15\n7 95739 1.1 0.05 2 10 20 30 1e15\n7 95739 1 0 0 0 0 0 1e15\n");
    try {
        parse_catalog(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
    }
}

TEST(Catalog, EmptyAndMalformed) {
    std::istringstream empty("# only comments\n\n");
    try {
        parse_catalog(empty);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("empty catalog"), std::string::npos);
    }
    std::istringstream bad("1 95739 1.1 0.05 2 10 20 30 1e15\n2 95739 abc 0.05 2 10 20 30 1e15\n");
    try {
        parse_catalog(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream short_line("1 95739 1.1 0.05\n");
    EXPECT_THROW(parse_catalog(short_line), ParseError);
}

TEST(Catalog, SaveLoadRoundTrip) {
    const auto cat = synth_catalog(50, 11);
    const auto path = std::filesystem::temp_directory_path() / "dyson_cat_roundtrip.txt";
    save_catalog(path.string(), cat);
    const auto back = load_catalog(path.string());
    ASSERT_EQ(back.size(), cat.size());
    for (std::size_t i = 0; i < cat.size(); ++i) {
        EXPECT_EQ(back[i].id, cat[i].id);
        EXPECT_EQ(back[i].m0, cat[i].m0);
        EXPECT_EQ(back[i].elements.a, cat[i].elements.a);
        EXPECT_NEAR(back[i].elements.i, cat[i].elements.i, 1e-16);
        EXPECT_NEAR(back[i].elements.M0, cat[i].elements.M0, 1e-15);
    }
    std::filesystem::remove(path);
}

TEST(Catalog, PruneBoundsAndProperties) {
    std::istringstream in(three_lines());
    const auto cat = parse_catalog(in);
    const auto p = prune(cat);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].id, 1);
    EXPECT_EQ(p[1].id, 3);
    // record exactly on every bound is kept
    std::vector<AsteroidRecord> edge{cat[0]};
    edge[0].elements.a = 2.8;
    edge[0].elements.e = 0.1584;
    edge[0].elements.i = 8.897 * kDeg;
    edge[0].m0 = 5.8497e13;
    EXPECT_EQ(prune(Catalog(edge, "edge")).size(), 1u);
    // idempotent and monotone
    const auto big = synth_catalog(300, 5, SynthRanges{.a_lo = 0.5, .a_hi = 3.5, .e_hi = 0.3, .i_hi = 0.3, .m_lo = 1e12});
    const auto once = prune(big);
    EXPECT_EQ(prune(once).size(), once.size());
    PruneBounds tight;
    tight.a_max = 2.0;
    EXPECT_LE(prune(big, tight).size(), once.size());
}

TEST(Catalog, SynthDeterministicAndInsidePruneBox) {
    std::ostringstream a, b;
    write_catalog(a, synth_catalog(10, 42));
    write_catalog(b, synth_catalog(10, 42));
    EXPECT_EQ(a.str(), b.str());
    const auto cat = synth_catalog(500, 3);
    EXPECT_EQ(prune(cat).size(), 500u);
    SynthRanges point{.a_lo = 1.2, .a_hi = 1.2, .e_lo = 0.1, .e_hi = 0.1, .i_lo = 0.02, .i_hi = 0.02, .m_lo = 1e14, .m_hi = 1e14};
    const auto pc = synth_catalog(10, 1, point);
    for (const auto& r : pc) {
        EXPECT_EQ(r.elements.a, 1.2);
        EXPECT_EQ(r.elements.e, 0.1);
    }
    EXPECT_EQ(pc[9].id, 10);
    SynthRanges bad;
    bad.a_lo = 3.0;
    bad.a_hi = 1.0;
    EXPECT_THROW(synth_catalog(10, 1, bad), InputError);
}

TEST(Catalog, EarthDelegatesToKepler) {
    const auto s = earth_state(Epoch(95739.0));
    EXPECT_NEAR(s.r.norm(), 1.49597870691e8 * (1 - 0.0167), 1e-3);
}

namespace {
double sphere(const Point& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return s;
}
double rastrigin(const Point& x) {
    double s = 10.0 * x.size();
    for (double v : x) s += v * v - 10.0 * std::cos(2 * M_PI * v);
    return s;
}
}  // namespace

TEST(Search, GaSphere) {
    const SearchSpace sp({-5, -5, -5}, {5, 5, 5});
    const auto rep = ga_minimize(sphere, sp, {.pop = 50, .generations = 100, .seed = 3});
    EXPECT_LT(rep.best_value, 1e-2);
    EXPECT_EQ(rep.evaluations, 50u + 100u * 48u);
    EXPECT_DOUBLE_EQ(sphere(rep.best_point), rep.best_value);
    for (std::size_t i = 1; i < rep.history.size(); ++i) EXPECT_LE(rep.history[i], rep.history[i - 1]);
}

TEST(Search, GaDegenerateAndDeterministic) {
    const SearchSpace sp({2.5}, {2.5});
    const auto rep = ga_minimize(sphere, sp, {.pop = 10, .generations = 5, .seed = 1});
    EXPECT_EQ(rep.best_point[0], 2.5);
    const SearchSpace s3({-5, -5, -5}, {5, 5, 5});
    const auto a = ga_minimize(rastrigin, s3, {.pop = 30, .generations = 20, .seed = 9});
    const auto b = ga_minimize(rastrigin, s3, {.pop = 30, .generations = 20, .seed = 9, .jobs = 3});
    EXPECT_EQ(a, b);
}

TEST(Search, PsoRastrigin) {
    const SearchSpace sp({-5.12, -5.12}, {5.12, 5.12});
    const auto rep = pso_minimize(rastrigin, sp, {.swarm = 200, .iters = 500, .stall_limit = 100, .seed = 4});
    EXPECT_LT(rep.best_value, 1.0);
    const auto again = pso_minimize(rastrigin, sp, {.swarm = 200, .iters = 500, .stall_limit = 100, .seed = 4, .jobs = 2});
    EXPECT_EQ(rep, again);
}

TEST(Search, PsoStallLimitOnConstant) {
    const SearchSpace sp({0, 0}, {1, 1});
    const auto rep = pso_minimize([](const Point&) { return 3.0; }, sp, {.swarm = 5, .iters = 100, .stall_limit = 1});
    EXPECT_EQ(rep.iterations, 1u);
    EXPECT_EQ(rep.evaluations, 10u);
}

TEST(Search, IntegralityRespected) {
    const SearchSpace sp({0, 12}, {1, 36}, {false, true});
    auto f = [](const Point& x) {
        EXPECT_EQ(x[1], std::round(x[1]));
        return std::abs(x[1] - 20.4) + x[0];
    };
    const auto g = ga_minimize(f, sp, {.pop = 20, .generations = 20});
    EXPECT_EQ(g.best_point[1], 20.0);
    const auto p = pso_minimize(f, sp, {.swarm = 20, .iters = 50});
    EXPECT_EQ(p.best_point[1], 20.0);
}

TEST(Search, NonFiniteDiscarded) {
    const SearchSpace sp({-1}, {1});
    auto f = [](const Point& x) { return x[0] > 0 ? std::nan("") : x[0] * x[0]; };
    const auto rep = ga_minimize(f, sp, {.pop = 20, .generations = 10});
    EXPECT_GT(rep.discarded, 0u);
    EXPECT_LE(rep.best_point[0], 0.0);
    EXPECT_TRUE(std::isfinite(rep.best_value));
}

TEST(Search, NelderMeadRosenbrock) {
    const SearchSpace sp({-2, -2}, {2, 2});
    auto f = [](const Point& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); };
    const auto rep = nelder_mead(f, sp, {-1.2, 1.0}, {.max_evals = 5000, .x_tol = 1e-12, .f_tol = 1e-16});
    EXPECT_NEAR(rep.best_point[0], 1.0, 1e-4);
    EXPECT_NEAR(rep.best_point[1], 1.0, 1e-4);
}
