#pragma once

// Genetic algorithm and particle swarm minimizers over boxed, optionally
// integer-valued search spaces. Random numbers are drawn sequentially before
// each batch of evaluations, so results do not depend on the job count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "dyson/core/error.hpp"
#include "dyson/core/log.hpp"
#include "dyson/core/parallel.hpp"
#include "dyson/core/rng.hpp"

namespace dyson {

using Point = std::vector<double>;
using Objective = std::function<double(const Point&)>;

struct SearchSpace {
    std::vector<double> lower, upper;
    std::vector<bool> integer;

    SearchSpace() = default;
    SearchSpace(std::vector<double> lo, std::vector<double> hi, std::vector<bool> integ = {})
        : lower(std::move(lo)), upper(std::move(hi)), integer(std::move(integ)) {
        if (integer.empty()) integer.assign(lower.size(), false);
        validate();
    }

    std::size_t dims() const { return lower.size(); }

    void validate() const {
        if (lower.size() != upper.size() || lower.size() != integer.size() || lower.empty())
            throw InputError("search space: inconsistent dimensions");
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
                throw InputError("search space: lower bound above upper bound");
    }

    /// Clamps into the box and rounds integer dimensions.
    void repair(Point& x) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double lo = lower[i], hi = upper[i];
            if (integer[i]) {
                lo = std::ceil(lo);
                hi = std::max(lo, std::floor(hi));
                x[i] = std::round(x[i]);
            }
            x[i] = std::clamp(x[i], lo, hi);
        }
    }

    double range(std::size_t i) const { return upper[i] - lower[i]; }
};

struct SearchReport {
    Point best_point;
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    std::vector<double> history;  // best value after each generation/iteration
    std::size_t discarded = 0;    // non-finite objective values

    bool operator==(const SearchReport&) const = default;
};

struct GaParams {
    std::size_t pop = 200;
    std::size_t generations = 100;
    std::uint64_t seed = 1;
    std::size_t tournament = 3;
    double crossover_p = 0.9;
    double mutation_sigma = 0.1;  // fraction of the range
    std::size_t elites = 2;
    std::size_t stall_limit = 0;  // 0 disables
    unsigned jobs = 1;
    std::vector<Point> initial;
};

struct PsoParams {
    std::size_t swarm = 100;
    std::size_t iters = 200;
    std::size_t stall_limit = 50;
    std::uint64_t seed = 1;
    double w = 0.729;
    double c1 = 1.49445;
    double c2 = 1.49445;
    double vmax_frac = 0.2;
    unsigned jobs = 1;
    std::vector<Point> initial;
};

namespace detail {

inline void evaluate_batch(const Objective& f, const std::vector<Point>& xs, std::vector<double>& out, unsigned jobs,
                           SearchReport& rep) {
    out.assign(xs.size(), 0.0);
    parallel_for(xs.size(), jobs, [&](std::size_t i) { out[i] = f(xs[i]); });
    rep.evaluations += xs.size();
    for (auto& v : out) {
        if (!std::isfinite(v)) {
            ++rep.discarded;
            log::debug("search", "non-finite objective value discarded");
            v = std::numeric_limits<double>::infinity();
        }
    }
}

inline void track_best(const std::vector<Point>& xs, const std::vector<double>& fs, SearchReport& rep) {
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (fs[i] < rep.best_value) {
            rep.best_value = fs[i];
            rep.best_point = xs[i];
        }
}

inline Point random_point(const SearchSpace& s, Rng& rng) {
    Point x(s.dims());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(s.lower[i], s.upper[i]);
    s.repair(x);
    return x;
}

inline std::vector<Point> seed_population(const SearchSpace& s, std::size_t n, const std::vector<Point>& init, Rng& rng) {
    std::vector<Point> pop;
    pop.reserve(n);
    for (const auto& p : init) {
        if (pop.size() == n) break;
        if (p.size() != s.dims()) throw InputError("search: initial point has wrong dimension");
        Point q = p;
        s.repair(q);
        pop.push_back(std::move(q));
    }
    while (pop.size() < n) pop.push_back(random_point(s, rng));
    return pop;
}

}  // namespace detail

inline SearchReport ga_minimize(const Objective& f, const SearchSpace& space, const GaParams& p) {
    space.validate();
    if (p.pop < 2 || p.tournament < 1) throw InputError("ga: population must be at least 2");
    const std::size_t D = space.dims();
    Rng rng(p.seed);
    SearchReport rep;
    std::vector<Point> pop = detail::seed_population(space, p.pop, p.initial, rng);
    std::vector<double> fit;
    detail::evaluate_batch(f, pop, fit, p.jobs, rep);
    detail::track_best(pop, fit, rep);
    if (rep.best_point.empty()) rep.best_point = pop.front();

    auto select = [&]() {
        std::size_t best = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(p.pop) - 1));
        for (std::size_t t = 1; t < p.tournament; ++t) {
            const auto c = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(p.pop) - 1));
            if (fit[c] < fit[best]) best = c;
        }
        return best;
    };
    const double pm = 1.0 / static_cast<double>(D);
    std::size_t stall = 0;
    for (std::size_t gen = 0; gen < p.generations; ++gen) {
        std::vector<std::size_t> order(p.pop);
        for (std::size_t i = 0; i < p.pop; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
        const std::size_t ne = std::min(p.elites, p.pop);
        std::vector<Point> next;
        std::vector<double> next_fit;
        next.reserve(p.pop);
        for (std::size_t e = 0; e < ne; ++e) {
            next.push_back(pop[order[e]]);
            next_fit.push_back(fit[order[e]]);
        }
        std::vector<Point> children;
        while (next.size() + children.size() < p.pop) {
            const Point& a = pop[select()];
            const Point& b = pop[select()];
            Point c1 = a, c2 = b;
            if (rng.uniform() < p.crossover_p)
                for (std::size_t i = 0; i < D; ++i)
                    if (rng.uniform() < 0.5) std::swap(c1[i], c2[i]);
            for (Point* c : {&c1, &c2}) {
                for (std::size_t i = 0; i < D; ++i)
                    if (rng.uniform() < pm) (*c)[i] += p.mutation_sigma * space.range(i) * rng.normal();
                space.repair(*c);
            }
            children.push_back(std::move(c1));
            if (next.size() + children.size() < p.pop) children.push_back(std::move(c2));
        }
        std::vector<double> child_fit;
        detail::evaluate_batch(f, children, child_fit, p.jobs, rep);
        const double before = rep.best_value;
        detail::track_best(children, child_fit, rep);
        for (std::size_t i = 0; i < children.size(); ++i) {
            next.push_back(std::move(children[i]));
            next_fit.push_back(child_fit[i]);
        }
        pop = std::move(next);
        fit = std::move(next_fit);
        rep.history.push_back(rep.best_value);
        ++rep.iterations;
        stall = rep.best_value < before ? 0 : stall + 1;
        if (p.stall_limit > 0 && stall >= p.stall_limit) break;
    }
    return rep;
}

inline SearchReport pso_minimize(const Objective& f, const SearchSpace& space, const PsoParams& p) {
    space.validate();
    if (p.swarm < 1) throw InputError("pso: swarm must be non-empty");
    const std::size_t D = space.dims();
    Rng rng(p.seed);
    SearchReport rep;
    std::vector<Point> x = detail::seed_population(space, p.swarm, p.initial, rng);
    std::vector<double> vmax(D);
    for (std::size_t i = 0; i < D; ++i) vmax[i] = p.vmax_frac * space.range(i);
    std::vector<Point> v(p.swarm, Point(D, 0.0));
    for (auto& vi : v)
        for (std::size_t i = 0; i < D; ++i) vi[i] = rng.uniform(-vmax[i], vmax[i]);
    std::vector<double> fx;
    detail::evaluate_batch(f, x, fx, p.jobs, rep);
    std::vector<Point> pbest = x;
    std::vector<double> pval = fx;
    detail::track_best(x, fx, rep);
    if (rep.best_point.empty()) rep.best_point = x.front();

    std::size_t stall = 0;
    for (std::size_t it = 0; it < p.iters; ++it) {
        for (std::size_t k = 0; k < p.swarm; ++k) {
            for (std::size_t i = 0; i < D; ++i) {
                const double r1 = rng.uniform(), r2 = rng.uniform();
                double vi = p.w * v[k][i] + p.c1 * r1 * (pbest[k][i] - x[k][i]) +
                            p.c2 * r2 * (rep.best_point[i] - x[k][i]);
                vi = std::clamp(vi, -vmax[i], vmax[i]);
                double xi = x[k][i] + vi;
                if (xi < space.lower[i] || xi > space.upper[i]) {
                    xi = std::clamp(xi, space.lower[i], space.upper[i]);
                    vi = 0.0;
                }
                v[k][i] = vi;
                x[k][i] = xi;
            }
            space.repair(x[k]);
        }
        detail::evaluate_batch(f, x, fx, p.jobs, rep);
        const double before = rep.best_value;
        for (std::size_t k = 0; k < p.swarm; ++k)
            if (fx[k] < pval[k]) {
                pval[k] = fx[k];
                pbest[k] = x[k];
            }
        detail::track_best(x, fx, rep);
        rep.history.push_back(rep.best_value);
        ++rep.iterations;
        stall = rep.best_value < before ? 0 : stall + 1;
        if (p.stall_limit > 0 && stall >= p.stall_limit) break;
    }
    return rep;
}

}  // namespace dyson
