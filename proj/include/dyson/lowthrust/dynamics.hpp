#pragma once

// Modified equinoctial dynamics with constant-magnitude thrust, in canonical
// units (length AU, time such that mu = 1). Everything is templated on the
// scalar so the same expressions feed doubles, duals and nested duals.

#include <array>
#include <cmath>

#include "dyson/astro/kepler.hpp"
#include "dyson/core/dual.hpp"
#include "dyson/core/error.hpp"

namespace dyson::lowthrust {

template <class T>
using Vec6 = std::array<T, 6>;

/// Conversion factors to canonical units.
struct Canonical {
    double length;  // km
    double time;    // s
    double speed;   // km/s
    double accel;   // km/s^2

    explicit Canonical(const Constants& c = default_constants())
        : length(c.au),
          time(std::sqrt(c.au * c.au * c.au / c.mu_sun)),
          speed(length / time),
          accel(length / (time * time)) {}

    double days(double t) const { return t * time / 86400.0; }
    double from_days(double d) const { return d * 86400.0 / time; }
};

/// Constant thrust acceleration in canonical units.
inline double canonical_f(const Constants& c = default_constants()) {
    return c.f_atd_kms2() / Canonical(c).accel;
}

inline Vec6<double> to_canonical(const EquinoctialState& x, const Constants& c = default_constants()) {
    return {x.p / c.au, x.f, x.g, x.h, x.k, x.L};
}

inline EquinoctialState from_canonical(const Vec6<double>& x, const Constants& c = default_constants()) {
    return EquinoctialState{x[0] * c.au, x[1], x[2], x[3], x[4], x[5]};
}

template <class T>
struct MeeMatrices {
    T A6;                                // only the L row of A is non-zero
    std::array<std::array<T, 3>, 6> B;   // columns: radial, transverse, normal
};

template <class T>
MeeMatrices<T> mee_matrices(const Vec6<T>& x) {
    using std::cos;
    using std::sin;
    using std::sqrt;
    const T& p = x[0];
    const T& f = x[1];
    const T& g = x[2];
    const T& h = x[3];
    const T& k = x[4];
    const T cL = cos(x[5]);
    const T sL = sin(x[5]);
    const T sq = sqrt(p);
    const T w = 1.0 + f * cL + g * sL;
    const T s2 = 1.0 + h * h + k * k;
    const T hk = h * sL - k * cL;
    const T sqw = sq / w;
    const T nz = sqw * hk;

    MeeMatrices<T> m;
    const T wp = w / p;
    m.A6 = sq * wp * wp;
    m.B[0] = {T(0.0), 2.0 * p * sqw, T(0.0)};
    m.B[1] = {sq * sL, sqw * ((w + 1.0) * cL + f), -g * nz};
    m.B[2] = {-sq * cL, sqw * ((w + 1.0) * sL + g), f * nz};
    m.B[3] = {T(0.0), T(0.0), 0.5 * sqw * s2 * cL};
    m.B[4] = {T(0.0), T(0.0), 0.5 * sqw * s2 * sL};
    m.B[5] = {T(0.0), T(0.0), nz};
    return m;
}

template <class T>
std::array<T, 3> b_transpose_lambda(const MeeMatrices<T>& m, const Vec6<T>& lam) {
    std::array<T, 3> r{T(0.0), T(0.0), T(0.0)};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j) r[j] += m.B[i][j] * lam[i];
    return r;
}

template <class T>
T norm3(const std::array<T, 3>& v) {
    using std::sqrt;
    return sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

/// dx/dt = A(x) + B(x) u, canonical acceleration u.
template <class T, class U>
Vec6<T> mee_rates(const Vec6<T>& x, const std::array<U, 3>& u) {
    const auto m = mee_matrices(x);
    Vec6<T> r;
    for (int i = 0; i < 6; ++i) r[i] = m.B[i][0] * u[0] + m.B[i][1] * u[1] + m.B[i][2] * u[2];
    r[5] += m.A6;
    return r;
}

/// Physical-unit dynamics: accel in m/s^2 (RTN), result in km/s for p and rad/s otherwise.
inline std::array<double, 6> mee_dynamics(const EquinoctialState& x, const Vec3& accel_ms2,
                                          const Constants& c = default_constants()) {
    if (!(x.p > 0.0) || !(std::hypot(x.f, x.g) < 1.0)) throw InputError("mee_dynamics: singular state");
    const Canonical cu(c);
    const std::array<double, 3> u{accel_ms2.x() * 1e-3 / cu.accel, accel_ms2.y() * 1e-3 / cu.accel,
                                  accel_ms2.z() * 1e-3 / cu.accel};
    auto r = mee_rates(to_canonical(x, c), u);
    r[0] *= cu.length / cu.time;
    for (int i = 1; i < 6; ++i) r[i] /= cu.time;
    return r;
}

struct Control {
    std::array<double, 3> alpha;  // unit thrust direction (RTN)
    double tau;                   // thrust ratio
};

/// Minimizer of the energy-problem Hamiltonian; for the time-optimal problem
/// the direction is the same and tau is 1.
inline Control optimal_control(const Vec6<double>& x, const Vec6<double>& lam) {
    const auto btl = b_transpose_lambda(mee_matrices(x), lam);
    const double n = norm3(btl);
    if (!(n > 0.0) || !std::isfinite(n)) throw ConvergenceError("optimal_control: vanishing B^T lambda (singular arc)");
    return Control{{-btl[0] / n, -btl[1] / n, -btl[2] / n}, n};
}

/// 1/2 f tau^2 + lam^T A + f tau lam^T B alpha.
inline double hamiltonian_energy(const Vec6<double>& x, const Vec6<double>& lam, const Control& u, double f) {
    const auto m = mee_matrices(x);
    const auto btl = b_transpose_lambda(m, lam);
    return 0.5 * f * u.tau * u.tau + lam[5] * m.A6 +
           f * u.tau * (btl[0] * u.alpha[0] + btl[1] * u.alpha[1] + btl[2] * u.alpha[2]);
}

/// 1 + lam^T A + f lam^T B alpha.
inline double hamiltonian_time(const Vec6<double>& x, const Vec6<double>& lam, const std::array<double, 3>& alpha,
                               double f) {
    const auto m = mee_matrices(x);
    const auto btl = b_transpose_lambda(m, lam);
    return 1.0 + lam[5] * m.A6 + f * (btl[0] * alpha[0] + btl[1] * alpha[1] + btl[2] * alpha[2]);
}

/// Time-optimal Hamiltonian with the optimal direction substituted.
template <class T>
T hamiltonian_time_optimal(const Vec6<T>& x, const Vec6<T>& lam, double f) {
    const auto m = mee_matrices(x);
    return 1.0 + lam[5] * m.A6 - f * norm3(b_transpose_lambda(m, lam));
}

/// dlam/dt = -d(lam^T A)/dx - f tau d(lam^T B alpha)/dx with the control held fixed.
template <class T>
Vec6<T> costate_rates(const Vec6<T>& x, const Vec6<T>& lam, const std::array<double, 3>& alpha, double tau,
                      double f) {
    using D = ad::Dual<T, 6>;
    Vec6<D> xd;
    for (int i = 0; i < 6; ++i) xd[i] = D::variable(x[i], i);
    const auto m = mee_matrices(xd);
    D h = m.A6 * lam[5];
    for (int i = 0; i < 6; ++i)
        h += (m.B[i][0] * alpha[0] + m.B[i][1] * alpha[1] + m.B[i][2] * alpha[2]) * (f * tau * lam[i]);
    Vec6<T> r;
    for (int i = 0; i < 6; ++i) r[i] = -h.d[i];
    return r;
}

/// Combined state and costate rates for the time-optimal problem (tau = 1).
/// The Hamiltonian is differentiated once with the state seeded; its value
/// parts double as A and B for the state equation.
template <class T>
void time_optimal_rates(const Vec6<T>& x, const Vec6<T>& lam, double f, Vec6<T>& dx, Vec6<T>& dlam) {
    using D = ad::Dual<T, 6>;
    Vec6<D> xd;
    for (int i = 0; i < 6; ++i) xd[i] = D::variable(x[i], i);
    const auto m = mee_matrices(xd);
    std::array<D, 3> btl{D(T(0.0)), D(T(0.0)), D(T(0.0))};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j) btl[j] += m.B[i][j] * lam[i];
    const D n = norm3(btl);
    if (!(ad::value(n) > 0.0)) throw ConvergenceError("time-optimal arc: vanishing B^T lambda");
    const D h = m.A6 * lam[5] - f * n;
    for (int i = 0; i < 6; ++i) dlam[i] = -h.d[i];
    const T inv = 1.0 / n.v;
    std::array<T, 3> alpha{-btl[0].v * inv, -btl[1].v * inv, -btl[2].v * inv};
    for (int i = 0; i < 6; ++i)
        dx[i] = f * (m.B[i][0].v * alpha[0] + m.B[i][1].v * alpha[1] + m.B[i][2].v * alpha[2]);
    dx[5] += m.A6.v;
}

/// State rates of the energy problem with constant lam_{1:5} and lam_L = 0
/// (the simplified costate equation keeps these costates fixed).
template <class T>
Vec6<T> energy_rates(const Vec6<T>& x, const Vec6<T>& lam, double f) {
    const auto m = mee_matrices(x);
    const auto btl = b_transpose_lambda(m, lam);
    Vec6<T> r;
    for (int i = 0; i < 6; ++i) r[i] = -f * (m.B[i][0] * btl[0] + m.B[i][1] * btl[1] + m.B[i][2] * btl[2]);
    r[5] += m.A6;
    return r;
}

}  // namespace dyson::lowthrust
