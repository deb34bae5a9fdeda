#pragma once

// Adaptive DOP853 integrator over std::array states. The scalar type may be
// an ad::Dual; step-size control looks at values only, so derivative parts
// are those of the discrete flow map along a fixed step sequence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "dyson/core/dop853_tableau.hpp"
#include "dyson/core/dual.hpp"
#include "dyson/core/error.hpp"

namespace dyson::ode {

struct Options {
    double rtol = 1e-11;
    double atol = 1e-13;
    double first_step = 0.0;  // 0 selects automatically
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 500000;
};

struct Stats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evals = 0;
};

struct NoObserver {
    template <class S, std::size_t D>
    void operator()(double, const std::array<S, D>&) const {}
};

namespace detail {

template <class S, std::size_t D>
double rms_scaled(const std::array<S, D>& y, const std::array<S, D>& f, const Options& o) {
    double sum = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
        const double scale = o.atol + std::abs(ad::value(y[i])) * o.rtol;
        const double q = ad::value(f[i]) / scale;
        sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(D));
}

}  // namespace detail

/// Integrates dy/dt = rhs(t, y) from t0 to t1 (either direction). The
/// observer is called with every accepted (t, y), including the start.
template <class S, std::size_t D, class Rhs, class Observer = NoObserver>
std::array<S, D> integrate(Rhs&& rhs, double t0, double t1, std::array<S, D> y,
                           const Options& opt = {}, Stats* stats = nullptr,
                           Observer&& observe = {}) {
    using State = std::array<S, D>;
    namespace tab = dop853;
    constexpr int kS = tab::kStages;

    observe(t0, y);
    if (t1 == t0) return y;
    const double dir = t1 > t0 ? 1.0 : -1.0;

    Stats local;
    Stats& st = stats ? *stats : local;

    State f = rhs(t0, y);
    ++st.rhs_evals;

    double h_abs = opt.first_step;
    if (h_abs <= 0.0) {
        // Hairer's starting step heuristic on the value parts.
        const double d0 = detail::rms_scaled(y, y, opt);
        const double d1 = detail::rms_scaled(y, f, opt);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, std::abs(t1 - t0));
        State y1;
        for (std::size_t i = 0; i < D; ++i) y1[i] = y[i] + dir * h0 * f[i];
        const State f1 = rhs(t0 + dir * h0, y1);
        ++st.rhs_evals;
        State df;
        for (std::size_t i = 0; i < D; ++i) df[i] = f1[i] - f[i];
        const double d2 = detail::rms_scaled(y, df, opt) / h0;
        const double h1 = (d1 <= 1e-15 && d2 <= 1e-15)
                              ? std::max(1e-6, h0 * 1e-3)
                              : std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
        h_abs = std::min(100.0 * h0, h1);
    }
    h_abs = std::min(h_abs, opt.max_step);

    std::array<State, kS + 1> K;
    double t = t0;
    std::size_t steps = 0;
    while (dir * (t1 - t) > 0.0) {
        if (++steps > opt.max_steps) throw ConvergenceError("ode: step budget exhausted");
        const double min_step = 10.0 * std::abs(std::nextafter(t, dir * INFINITY) - t);
        bool rejected = false;
        for (;;) {
            if (h_abs < min_step) throw ConvergenceError("ode: step size underflow");
            double t_new = t + dir * h_abs;
            if (dir * (t_new - t1) > 0.0) t_new = t1;
            const double h = t_new - t;

            K[0] = f;
            for (int s = 1; s < kS; ++s) {
                State ys = y;
                for (int j = 0; j < s; ++j) {
                    const double a = tab::A[s][j];
                    if (a == 0.0) continue;
                    for (std::size_t i = 0; i < D; ++i) ys[i] += (h * a) * K[j][i];
                }
                K[s] = rhs(t + tab::C[s] * h, ys);
            }
            State y_new = y;
            for (int j = 0; j < kS; ++j) {
                const double b = tab::B[j];
                if (b == 0.0) continue;
                for (std::size_t i = 0; i < D; ++i) y_new[i] += (h * b) * K[j][i];
            }
            State f_new = rhs(t_new, y_new);
            K[kS] = f_new;
            st.rhs_evals += kS;

            double e5 = 0.0, e3 = 0.0;
            for (std::size_t i = 0; i < D; ++i) {
                double s5 = 0.0, s3 = 0.0;
                for (int j = 0; j <= kS; ++j) {
                    const double kv = ad::value(K[j][i]);
                    s5 += tab::E5[j] * kv;
                    s3 += tab::E3[j] * kv;
                }
                const double scale =
                    opt.atol + std::max(std::abs(ad::value(y[i])), std::abs(ad::value(y_new[i]))) * opt.rtol;
                e5 += (s5 / scale) * (s5 / scale);
                e3 += (s3 / scale) * (s3 / scale);
            }
            double err = 0.0;
            if (e5 > 0.0 || e3 > 0.0)
                err = std::abs(h) * e5 / std::sqrt((e5 + 0.01 * e3) * static_cast<double>(D));

            if (err < 1.0) {
                double factor = err == 0.0 ? 10.0 : std::min(10.0, 0.9 * std::pow(err, -1.0 / 8.0));
                if (rejected) factor = std::min(1.0, factor);
                h_abs = std::min(h_abs * factor, opt.max_step);
                t = t_new;
                y = y_new;
                f = f_new;
                ++st.accepted;
                observe(t, y);
                break;
            }
            h_abs *= std::max(0.2, 0.9 * std::pow(err, -1.0 / 8.0));
            rejected = true;
            ++st.rejected;
        }
    }
    return y;
}

}  // namespace dyson::ode
