#pragma once

#include <cmath>
#include <utility>

#include "dyson/astro/kepler.hpp"

namespace dyson {

struct FlybySplit {
    Vec3 dv1 = Vec3::Zero();
    Vec3 dv2 = Vec3::Zero();
    double cost() const { return dv1.norm() + dv2.norm(); }
};

/// Smallest impulse along (v_A - v_minus) that enters the flyby ball, then
/// the remainder to v_plus.
inline FlybySplit flyby_split_greedy(const Vec3& v_minus, const Vec3& v_A, const Vec3& v_plus, double radius = 2.0) {
    const Vec3 d = v_A - v_minus;
    const double dn = d.norm();
    const double x = dn > radius ? 1.0 - radius / dn : 0.0;
    FlybySplit s;
    s.dv1 = x * d;
    s.dv2 = v_plus - (v_minus + s.dv1);
    return s;
}

/// Minimum of |dv1| + |dv2| with v_minus + dv1 inside the ball around v_A and
/// dv1 + dv2 = v_plus - v_minus. The problem is convex; when the segment
/// v_minus -> v_plus misses the ball the optimum lies on the sphere, in the
/// plane spanned by the three velocities.
inline FlybySplit flyby_split_optimal(const Vec3& v_minus, const Vec3& v_A, const Vec3& v_plus, double radius = 2.0) {
    const Vec3 seg = v_plus - v_minus;
    const double L2 = seg.squaredNorm();
    double tc = L2 > 0.0 ? std::clamp((v_A - v_minus).dot(seg) / L2, 0.0, 1.0) : 0.0;
    const Vec3 closest = v_minus + tc * seg;
    FlybySplit s;
    if ((closest - v_A).norm() <= radius) {
        // Any point of the segment inside the ball works; use the one nearest v_minus.
        const Vec3 w = v_minus - v_A;
        double t = 0.0;
        if (w.norm() > radius) {
            const double a = L2, b = 2.0 * w.dot(seg), c = w.squaredNorm() - radius * radius;
            const double disc = std::max(0.0, b * b - 4.0 * a * c);
            t = std::clamp((-b - std::sqrt(disc)) / (2.0 * a), 0.0, 1.0);
        }
        s.dv1 = t * seg;
        s.dv2 = seg - s.dv1;
        return s;
    }
    // In-plane basis centred on v_A.
    Vec3 e1 = v_minus - v_A;
    if (e1.norm() == 0.0) e1 = v_plus - v_A;
    e1.normalize();
    Vec3 e2 = (v_plus - v_A) - (v_plus - v_A).dot(e1) * e1;
    if (e2.norm() < 1e-12 * std::max(1.0, (v_plus - v_A).norm())) {
        e2 = e1.unitOrthogonal();
    } else {
        e2.normalize();
    }
    auto point = [&](double th) -> Vec3 { return v_A + radius * (std::cos(th) * e1 + std::sin(th) * e2); };
    auto cost = [&](double th) {
        const Vec3 u = point(th);
        return (u - v_minus).norm() + (v_plus - u).norm();
    };
    constexpr int kSamples = 720;
    double best_th = 0.0, best = cost(0.0);
    for (int k = 1; k < kSamples; ++k) {
        const double th = kTwoPi * k / kSamples;
        const double c = cost(th);
        if (c < best) {
            best = c;
            best_th = th;
        }
    }
    // Golden-section polish in the bracketing cell.
    const double h = kTwoPi / kSamples;
    double a = best_th - h, b = best_th + h;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = cost(x1), f2 = cost(x2);
    for (int it = 0; it < 100 && b - a > 1e-14; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = cost(x2);
        }
    }
    const double th = 0.5 * (a + b);
    const Vec3 u = v_A + (point(th) - v_A).normalized() * radius * (1.0 - 1e-13);
    s.dv1 = u - v_minus;
    s.dv2 = v_plus - u;
    // Never worse than the greedy split.
    const FlybySplit gr = flyby_split_greedy(v_minus, v_A, v_plus, radius);
    return gr.cost() < s.cost() ? gr : s;
}

}  // namespace dyson
