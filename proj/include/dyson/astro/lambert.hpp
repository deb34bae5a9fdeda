#pragma once

// Lambert's problem after Izzo's formulation: Householder iterations on the
// x variable with Battin, Lancaster and Lagrange time-of-flight expressions.

#include <cmath>
#include <vector>

#include "dyson/astro/kepler.hpp"

namespace dyson {

enum class Direction { prograde, retrograde };
enum class Branch { left, right };

struct LambertSolution {
    Vec3 v1 = Vec3::Zero();
    Vec3 v2 = Vec3::Zero();
    bool ill_conditioned = false;
    int iterations = 0;
};

namespace detail {

class IzzoLambert {
public:
    explicit IzzoLambert(double lambda) : lambda_(lambda) {}

    double tof(double x, int N) const {
        const double dist = std::abs(x - 1.0);
        if (dist < 0.2 && dist > 0.01) return tof_lagrange(x, N);
        const double K = lambda_ * lambda_;
        const double E = x * x - 1.0;
        const double rho = std::abs(E);
        const double z = std::sqrt(1.0 + K * E);
        if (dist < 0.01) {
            const double eta = z - lambda_ * x;
            const double S1 = 0.5 * (1.0 - lambda_ - x * eta);
            const double Q = 4.0 / 3.0 * hypergeometric(S1, 1e-14);
            return (eta * eta * eta * Q + 4.0 * lambda_ * eta) / 2.0 + N * kPi / std::pow(rho, 1.5);
        }
        const double y = std::sqrt(rho);
        const double g = x * z - lambda_ * E;
        double d;
        if (E < 0.0) {
            d = N * kPi + std::acos(std::clamp(g, -1.0, 1.0));
        } else {
            const double f = y * (z - lambda_ * x);
            d = std::log(f + g);
        }
        return (x - lambda_ * z - d / y) / E;
    }

    void derivatives(double x, double T, double& d1, double& d2, double& d3) const {
        const double l2 = lambda_ * lambda_;
        const double l3 = l2 * lambda_;
        const double umx2 = 1.0 - x * x;
        const double y = std::sqrt(1.0 - l2 * umx2);
        const double y2 = y * y, y3 = y2 * y;
        d1 = 1.0 / umx2 * (3.0 * T * x - 2.0 + 2.0 * l3 * x / y);
        d2 = 1.0 / umx2 * (3.0 * T + 5.0 * x * d1 + 2.0 * (1.0 - l2) * l3 / y3);
        d3 = 1.0 / umx2 * (7.0 * x * d2 + 8.0 * d1 - 6.0 * (1.0 - l2) * l2 * l3 * x / y3 / y2);
    }

    int householder(double T, double& x, int N, double eps, int max_iter) const {
        int it = 0;
        double err = 1.0;
        while (err > eps && it < max_iter) {
            const double t = tof(x, N);
            double d1, d2, d3;
            derivatives(x, t, d1, d2, d3);
            const double delta = t - T;
            const double d12 = d1 * d1;
            const double xn = x - delta * (d12 - delta * d2 / 2.0) /
                                      (d1 * (d12 - delta * d2) + d3 * delta * delta / 6.0);
            err = std::abs(x - xn);
            x = xn;
            ++it;
        }
        return it;
    }

    double lambda() const { return lambda_; }

private:
    double tof_lagrange(double x, int N) const {
        const double a = 1.0 / (1.0 - x * x);
        if (a > 0.0) {
            const double alfa = 2.0 * std::acos(x);
            double beta = 2.0 * std::asin(std::sqrt(lambda_ * lambda_ / a));
            if (lambda_ < 0.0) beta = -beta;
            return a * std::sqrt(a) * ((alfa - std::sin(alfa)) - (beta - std::sin(beta)) + kTwoPi * N) / 2.0;
        }
        const double alfa = 2.0 * std::acosh(x);
        double beta = 2.0 * std::asinh(std::sqrt(-lambda_ * lambda_ / a));
        if (lambda_ < 0.0) beta = -beta;
        return -a * std::sqrt(-a) * ((beta - std::sinh(beta)) - (alfa - std::sinh(alfa))) / 2.0;
    }

    static double hypergeometric(double z, double tol) {
        double Sj = 1.0, Cj = 1.0, err = 1.0;
        for (int j = 0; err > tol && j < 1000; ++j) {
            const double Cj1 = Cj * (3.0 + j) * (1.0 + j) / (2.5 + j) * z / (j + 1);
            Sj += Cj1;
            err = std::abs(Cj1);
            Cj = Cj1;
        }
        return Sj;
    }

    double lambda_;
};

}  // namespace detail

/// Solves for the conic from r1 to r2 in tof seconds. `revs` full revolutions
/// are allowed; `branch` selects between the two multi-rev solutions.
/// Throws InfeasibleError when no solution exists for `revs`.
inline LambertSolution lambert(const Vec3& r1, const Vec3& r2, double tof, double mu,
                               Direction dir = Direction::prograde, int revs = 0,
                               Branch branch = Branch::left) {
    if (!(tof > 0.0) || !std::isfinite(tof)) throw InputError("lambert: tof must be positive");
    if (revs < 0) throw InputError("lambert: negative revolution count");
    const double r1n = r1.norm(), r2n = r2.norm();
    if (!(r1n > 0.0) || !(r2n > 0.0)) throw InputError("lambert: zero radius");
    const double c = (r2 - r1).norm();
    const double s = 0.5 * (c + r1n + r2n);
    const Vec3 ir1 = r1 / r1n, ir2 = r2 / r2n;
    Vec3 ih = ir1.cross(ir2);
    LambertSolution out;
    const double sin_angle = ih.norm();
    bool flipped = false;
    if (sin_angle < 1e-8) {
        out.ill_conditioned = true;
        if (ir1.dot(ir2) > 0.0) throw InfeasibleError("lambert: coincident radius directions");
        // Half-revolution transfer: take the plane closest to the ecliptic.
        Vec3 ref = Vec3::UnitZ();
        if (std::abs(ir1.z()) > 0.9) ref = Vec3::UnitX();
        ih = (ref - ref.dot(ir1) * ir1).normalized();
    } else {
        if (sin_angle < 1e-4) out.ill_conditioned = true;
        ih /= sin_angle;
        flipped = ih.z() < 0.0;
    }
    const double lambda2 = std::max(0.0, 1.0 - c / s);
    double lam = std::sqrt(lambda2);
    Vec3 it1, it2;
    if (flipped) {
        lam = -lam;
        it1 = ir1.cross(ih);
        it2 = ir2.cross(ih);
    } else {
        it1 = ih.cross(ir1);
        it2 = ih.cross(ir2);
    }
    it1.normalize();
    it2.normalize();
    if (dir == Direction::retrograde) {
        lam = -lam;
        it1 = -it1;
        it2 = -it2;
    }
    const double lambda3 = lam * lambda2;
    const double T = std::sqrt(2.0 * mu / (s * s * s)) * tof;
    const detail::IzzoLambert solver(lam);

    const double T00 = std::acos(lam) + lam * std::sqrt(1.0 - lambda2);
    const double T1 = 2.0 / 3.0 * (1.0 - lambda3);
    double x;
    if (revs == 0) {
        if (T >= T00) x = -(T - T00) / (T - T00 + 4.0);
        else if (T <= T1) x = T1 * (T1 - T) / (2.0 / 5.0 * (1.0 - lambda2 * lambda3) * T) + 1.0;
        else x = std::pow(T / T00, 0.69314718055994529 / std::log(T1 / T00)) - 1.0;
        out.iterations = solver.householder(T, x, 0, 1e-13, 30);
    } else {
        // Minimum time for this revolution count.
        double xm = 0.0, Tmin = solver.tof(0.0, revs);
        for (int it = 0; it < 30; ++it) {
            double d1, d2, d3;
            solver.derivatives(xm, Tmin, d1, d2, d3);
            if (d1 == 0.0) break;
            const double xn = xm - d1 * d2 / (d2 * d2 - d1 * d3 / 2.0);
            const bool done = std::abs(xn - xm) < 1e-13;
            xm = xn;
            Tmin = solver.tof(xm, revs);
            if (done) break;
        }
        if (Tmin > T) throw InfeasibleError("lambert: no solution for the requested revolution count");
        if (branch == Branch::left) {
            const double tmp = std::pow((revs * kPi + kPi) / (8.0 * T), 2.0 / 3.0);
            x = (tmp - 1.0) / (tmp + 1.0);
        } else {
            const double tmp = std::pow((8.0 * T) / (revs * kPi), 2.0 / 3.0);
            x = (tmp - 1.0) / (tmp + 1.0);
        }
        out.iterations = solver.householder(T, x, revs, 1e-13, 30);
    }
    if (!std::isfinite(x)) throw ConvergenceError("lambert: iteration diverged");
    const double Tx = solver.tof(x, revs);
    if (!(std::abs(Tx - T) <= 1e-9 * std::max(1.0, T)))
        throw ConvergenceError("lambert: time of flight not matched", std::abs(Tx - T));

    const double gamma = std::sqrt(mu * s / 2.0);
    const double rho = (r1n - r2n) / c;
    const double sigma = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double y = std::sqrt(1.0 - lambda2 + lambda2 * x * x);
    const double vr1 = gamma * ((lam * y - x) - rho * (lam * y + x)) / r1n;
    const double vr2 = -gamma * ((lam * y - x) + rho * (lam * y + x)) / r2n;
    const double vt = gamma * sigma * (y + lam * x);
    out.v1 = vr1 * ir1 + vt / r1n * it1;
    out.v2 = vr2 * ir2 + vt / r2n * it2;
    return out;
}

}  // namespace dyson
