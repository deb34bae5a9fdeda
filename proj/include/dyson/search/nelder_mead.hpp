#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "dyson/search/searchkit.hpp"

namespace dyson {

struct NelderMeadParams {
    std::size_t max_evals = 2000;
    double x_tol = 1e-9;   // simplex size, relative to the box range
    double f_tol = 1e-12;
    double initial_step = 0.05;  // fraction of the box range
};

/// Box-bounded Nelder-Mead; trial points are projected into the box.
inline SearchReport nelder_mead(const Objective& f, const SearchSpace& space, Point x0, const NelderMeadParams& p = {}) {
    space.validate();
    const std::size_t n = space.dims();
    SearchReport rep;
    auto eval = [&](Point& x) {
        space.repair(x);
        double v = f(x);
        ++rep.evaluations;
        if (!std::isfinite(v)) {
            ++rep.discarded;
            v = std::numeric_limits<double>::infinity();
        }
        if (v < rep.best_value) {
            rep.best_value = v;
            rep.best_point = x;
        }
        return v;
    };
    std::vector<Point> s(n + 1, x0);
    std::vector<double> fv(n + 1);
    fv[0] = eval(s[0]);
    for (std::size_t i = 0; i < n; ++i) {
        double h = p.initial_step * space.range(i);
        if (h == 0.0) h = 0.0;
        s[i + 1][i] += (s[i + 1][i] + h <= space.upper[i]) ? h : -h;
        fv[i + 1] = eval(s[i + 1]);
    }
    const double a = 1.0, g = 2.0, r = 0.5, sh = 0.5;
    std::vector<std::size_t> idx(n + 1);
    while (rep.evaluations < p.max_evals) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return fv[i] < fv[j]; });
        std::vector<Point> s2;
        std::vector<double> f2;
        for (auto i : idx) {
            s2.push_back(s[i]);
            f2.push_back(fv[i]);
        }
        s = std::move(s2);
        fv = std::move(f2);
        ++rep.iterations;
        rep.history.push_back(rep.best_value);
        double size = 0.0;
        for (std::size_t k = 1; k <= n; ++k)
            for (std::size_t i = 0; i < n; ++i) {
                const double rg = space.range(i) > 0 ? space.range(i) : 1.0;
                size = std::max(size, std::abs(s[k][i] - s[0][i]) / rg);
            }
        if (size < p.x_tol || std::abs(fv[n] - fv[0]) <= p.f_tol * (1.0 + std::abs(fv[0]))) break;
        Point c(n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i) c[i] += s[k][i] / static_cast<double>(n);
        auto along = [&](double t) {
            Point x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + t * (s[n][i] - c[i]);
            return x;
        };
        Point xr = along(-a);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            Point xe = along(-g);
            const double fe = eval(xe);
            if (fe < fr) {
                s[n] = xe;
                fv[n] = fe;
            } else {
                s[n] = xr;
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            s[n] = xr;
            fv[n] = fr;
        } else {
            Point xc = fr < fv[n] ? along(-r) : along(r);
            const double fc = eval(xc);
            if (fc < std::min(fr, fv[n])) {
                s[n] = xc;
                fv[n] = fc;
            } else {
                for (std::size_t k = 1; k <= n; ++k) {
                    for (std::size_t i = 0; i < n; ++i) s[k][i] = s[0][i] + sh * (s[k][i] - s[0][i]);
                    fv[k] = eval(s[k]);
                }
            }
        }
    }
    return rep;
}

}  // namespace dyson
