#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "dyson/core/error.hpp"

namespace dyson {

/// Natural cubic spline through (x_i, y_i) with strictly increasing x.
class NaturalSpline {
public:
    NaturalSpline() = default;

    NaturalSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw InputError("spline: need at least two matching points");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw InputError("spline: abscissae must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2) return;
        // Tridiagonal system for the second derivatives, natural ends.
        std::vector<double> c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            const double a = h0, b = 2.0 * (h0 + h1), cc = h1;
            const double r = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
            const double den = b - a * c[i - 1];
            c[i] = cc / den;
            d[i] = (r - a * d[i - 1]) / den;
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = d[i] - c[i] * m_[i + 1];
            if (i == 1) break;
        }
    }

    std::size_t size() const { return x_.size(); }
    const std::vector<double>& x() const { return x_; }
    double front() const { return x_.front(); }
    double back() const { return x_.back(); }

    /// Power-basis coefficients of interval i in d = t - x_i.
    std::array<double, 4> coefficients(std::size_t i) const {
        const double h = x_[i + 1] - x_[i];
        const double a = y_[i];
        const double b = (y_[i + 1] - y_[i]) / h - h * (2.0 * m_[i] + m_[i + 1]) / 6.0;
        const double c = m_[i] / 2.0;
        const double e = (m_[i + 1] - m_[i]) / (6.0 * h);
        return {a, b, c, e};
    }

    std::size_t interval(double t) const {
        if (t <= x_.front()) return 0;
        if (t >= x_.back()) return x_.size() - 2;
        std::size_t lo = 0, hi = x_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (x_[mid] <= t) lo = mid; else hi = mid;
        }
        return lo;
    }

    double operator()(double t) const {
        const std::size_t i = interval(t);
        const auto k = coefficients(i);
        const double d = t - x_[i];
        return k[0] + d * (k[1] + d * (k[2] + d * k[3]));
    }

    double derivative(double t) const {
        const std::size_t i = interval(t);
        const auto k = coefficients(i);
        const double d = t - x_[i];
        return k[1] + d * (2.0 * k[2] + 3.0 * d * k[3]);
    }

    /// All t with s(t) = v, each polished by bisection to `tol`.
    std::vector<double> solve(double v, double tol = 1e-10) const {
        std::vector<double> roots;
        for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
            const auto k = coefficients(i);
            const double h = x_[i + 1] - x_[i];
            auto g = [&](double d) { return k[0] - v + d * (k[1] + d * (k[2] + d * k[3])); };
            std::vector<double> cuts{0.0};
            for (double r : critical_points(k, h)) cuts.push_back(r);
            cuts.push_back(h);
            const bool last = i + 2 == x_.size();
            for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
                double lo = cuts[j], hi = cuts[j + 1];
                double glo = g(lo), ghi = g(hi);
                if (glo == 0.0) {
                    push_unique(roots, x_[i] + lo, tol);
                    continue;
                }
                if (ghi == 0.0) {
                    if (last || j + 2 < cuts.size()) push_unique(roots, x_[i] + hi, tol);
                    continue;
                }
                if ((glo < 0.0) == (ghi < 0.0)) continue;
                while (hi - lo > tol) {
                    const double mid = 0.5 * (lo + hi);
                    const double gm = g(mid);
                    if ((gm < 0.0) == (glo < 0.0)) {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                push_unique(roots, x_[i] + 0.5 * (lo + hi), tol);
            }
        }
        return roots;
    }

    /// Range of the spline over [front, back] (knots and interior extrema).
    std::pair<double, double> range() const {
        double lo = y_.front(), hi = y_.front();
        for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
            const auto k = coefficients(i);
            const double h = x_[i + 1] - x_[i];
            std::vector<double> pts{h};
            for (double r : critical_points(k, h)) pts.push_back(r);
            for (double d : pts) {
                const double s = k[0] + d * (k[1] + d * (k[2] + d * k[3]));
                lo = std::min(lo, s);
                hi = std::max(hi, s);
            }
        }
        return {lo, hi};
    }

private:
    static std::vector<double> critical_points(const std::array<double, 4>& k, double h) {
        // Roots of b + 2c d + 3e d^2 inside (0, h), ascending.
        std::vector<double> r;
        const double A = 3.0 * k[3], B = 2.0 * k[2], C = k[1];
        if (std::abs(A) < 1e-300) {
            if (B != 0.0) r.push_back(-C / B);
        } else {
            const double disc = B * B - 4.0 * A * C;
            if (disc >= 0.0) {
                const double s = std::sqrt(disc);
                const double q = -0.5 * (B + std::copysign(s, B));
                r.push_back(q / A);
                if (q != 0.0) r.push_back(C / q);
            }
        }
        std::vector<double> out;
        for (double d : r)
            if (d > 0.0 && d < h) out.push_back(d);
        std::sort(out.begin(), out.end());
        return out;
    }

    static void push_unique(std::vector<double>& v, double t, double tol) {
        if (v.empty() || std::abs(v.back() - t) > 2.0 * tol) v.push_back(t);
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace dyson
