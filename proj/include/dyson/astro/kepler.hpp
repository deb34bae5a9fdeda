#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dyson/astro/constants.hpp"
#include "dyson/core/error.hpp"

namespace dyson {

using Vec3 = Eigen::Vector3d;

struct KeplerianElements {
    double a = 1.0;     // AU
    double e = 0.0;
    double i = 0.0;     // rad
    double raan = 0.0;  // rad
    double argp = 0.0;  // rad
    double M0 = 0.0;    // rad, at ref_epoch
    Epoch ref_epoch{};
};

struct CartesianState {
    Vec3 r = Vec3::Zero();  // km
    Vec3 v = Vec3::Zero();  // km/s
    Epoch epoch{};
};

struct EquinoctialState {
    double p = 0.0;  // km
    double f = 0.0, g = 0.0, h = 0.0, k = 0.0;
    double L = 0.0;  // rad
};

/// Solves M = E - e sin E for elliptic orbits.
inline double solve_kepler(double M, double e) {
    if (!(e >= 0.0 && e < 1.0) || !std::isfinite(M)) throw InputError("solve_kepler: invalid inputs");
    M = wrap_pi(M);
    double E = e < 0.8 ? M : (M >= 0.0 ? kPi : -kPi);
    double lo = -kPi, hi = kPi;
    for (int it = 0; it < 50; ++it) {
        const double F = E - e * std::sin(E) - M;
        if (F > 0.0) hi = E; else lo = E;
        const double dF = 1.0 - e * std::cos(E);
        const double step = F / dF;
        if (std::abs(step) < 1e-13) return E - step;
        double En = E - step;
        if (!(En > lo && En < hi)) En = 0.5 * (lo + hi);
        E = En;
    }
    throw ConvergenceError("solve_kepler: no convergence in 50 iterations", std::abs(E - e * std::sin(E) - M));
}

inline double true_from_mean(double M, double e) {
    const double E = solve_kepler(M, e);
    return 2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(E / 2.0), std::sqrt(1.0 - e) * std::cos(E / 2.0));
}

inline double mean_from_true(double nu, double e) {
    const double E = 2.0 * std::atan2(std::sqrt(1.0 - e) * std::sin(nu / 2.0), std::sqrt(1.0 + e) * std::cos(nu / 2.0));
    return E - e * std::sin(E);
}

inline void check_elements(const KeplerianElements& el) {
    if (!(el.a > 0.0) || !(el.e >= 0.0 && el.e < 1.0) || !(el.i >= 0.0 && el.i <= kPi) ||
        !std::isfinite(el.raan) || !std::isfinite(el.argp) || !std::isfinite(el.M0))
        throw InputError("invalid Keplerian elements");
}

namespace detail {
inline Eigen::Matrix3d perifocal_to_inertial(double raan, double i, double argp) {
    const double cO = std::cos(raan), sO = std::sin(raan);
    const double ci = std::cos(i), si = std::sin(i);
    const double cw = std::cos(argp), sw = std::sin(argp);
    Eigen::Matrix3d R;
    R << cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si,
         sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si,
         sw * si, cw * si, ci;
    return R;
}
}  // namespace detail

/// Cartesian state from elements with the given true anomaly.
inline CartesianState state_at_true_anomaly(const KeplerianElements& el, double nu, const Constants& c = default_constants()) {
    const double a = el.a * c.au;
    const double p = a * (1.0 - el.e * el.e);
    const double r = p / (1.0 + el.e * std::cos(nu));
    const double sq = std::sqrt(c.mu_sun / p);
    const Vec3 rp(r * std::cos(nu), r * std::sin(nu), 0.0);
    const Vec3 vp(-sq * std::sin(nu), sq * (el.e + std::cos(nu)), 0.0);
    const Eigen::Matrix3d R = detail::perifocal_to_inertial(el.raan, el.i, el.argp);
    CartesianState s;
    s.r = R * rp;
    s.v = R * vp;
    return s;
}

inline double mean_motion(double a_au, const Constants& c = default_constants()) {
    const double a = a_au * c.au;
    return std::sqrt(c.mu_sun / (a * a * a));
}

inline double period_s(double a_au, const Constants& c = default_constants()) {
    return kTwoPi / mean_motion(a_au, c);
}

/// Two-body state at epoch t.
inline CartesianState propagate_kepler(const KeplerianElements& el, Epoch t, const Constants& c = default_constants()) {
    check_elements(el);
    if (!t.finite()) throw InputError("propagate_kepler: non-finite epoch");
    const double n = mean_motion(el.a, c);
    const double dt = (t - el.ref_epoch) * c.day;
    const double M = wrap_2pi(el.M0 + std::fmod(n * dt, kTwoPi));
    CartesianState s = state_at_true_anomaly(el, true_from_mean(M, el.e), c);
    s.epoch = t;
    return s;
}

inline KeplerianElements cart_to_kep(const CartesianState& s, const Constants& c = default_constants()) {
    const double mu = c.mu_sun;
    const double r = s.r.norm();
    if (!(r > 0.0)) throw InputError("cart_to_kep: zero position");
    const Vec3 hv = s.r.cross(s.v);
    const double h = hv.norm();
    if (h < 1e-12 * r * s.v.norm() || h == 0.0) throw InputError("cart_to_kep: rectilinear orbit");
    const double energy = 0.5 * s.v.squaredNorm() - mu / r;
    if (energy >= 0.0) throw InputError("cart_to_kep: orbit is not elliptic");
    const Vec3 ev = s.v.cross(hv) / mu - s.r / r;
    const double e = ev.norm();
    KeplerianElements el;
    el.a = -mu / (2.0 * energy) / c.au;
    el.e = e;
    el.i = std::acos(std::clamp(hv.z() / h, -1.0, 1.0));
    el.ref_epoch = s.epoch;
    const Vec3 nv(-hv.y(), hv.x(), 0.0);
    const double nn = nv.norm();
    const bool equatorial = nn < 1e-12 * h;
    const bool circular = e < 1e-12;
    el.raan = equatorial ? 0.0 : wrap_2pi(std::atan2(nv.y(), nv.x()));
    // Reference direction for periapsis when the node is undefined.
    const Vec3 node_dir = equatorial ? Vec3(1.0, 0.0, 0.0) : Vec3(nv / nn);
    const Vec3 hh = hv / h;
    const Vec3 q_dir = hh.cross(node_dir);
    double nu;
    if (circular) {
        el.argp = 0.0;
        nu = std::atan2(s.r.dot(q_dir), s.r.dot(node_dir));
    } else {
        el.argp = wrap_2pi(std::atan2(ev.dot(q_dir), ev.dot(node_dir)));
        const Vec3 p_dir = ev / e;
        nu = std::atan2(s.r.dot(hh.cross(p_dir)), s.r.dot(p_dir));
    }
    el.M0 = wrap_2pi(mean_from_true(nu, e));
    return el;
}

inline CartesianState kep_to_cart(const KeplerianElements& el, Epoch t, const Constants& c = default_constants()) {
    return propagate_kepler(el, t, c);
}

inline EquinoctialState kep_to_mee(const KeplerianElements& el, const Constants& c = default_constants()) {
    check_elements(el);
    if (el.i >= kPi) throw InputError("kep_to_mee: retrograde equatorial orbit is singular");
    EquinoctialState x;
    x.p = el.a * c.au * (1.0 - el.e * el.e);
    const double lp = el.argp + el.raan;
    x.f = el.e * std::cos(lp);
    x.g = el.e * std::sin(lp);
    const double t = std::tan(el.i / 2.0);
    x.h = t * std::cos(el.raan);
    x.k = t * std::sin(el.raan);
    x.L = wrap_2pi(lp + true_from_mean(el.M0, el.e));
    return x;
}

inline KeplerianElements mee_to_kep(const EquinoctialState& x, Epoch ref = Epoch{}, const Constants& c = default_constants()) {
    const double e = std::hypot(x.f, x.g);
    if (!(x.p > 0.0) || !(e < 1.0)) throw InputError("mee_to_kep: invalid equinoctial state");
    KeplerianElements el;
    el.e = e;
    el.a = x.p / (1.0 - e * e) / c.au;
    const double t = std::hypot(x.h, x.k);
    el.i = 2.0 * std::atan(t);
    el.raan = t > 0.0 ? wrap_2pi(std::atan2(x.k, x.h)) : 0.0;
    const double lp = e > 0.0 ? std::atan2(x.g, x.f) : el.raan;
    el.argp = wrap_2pi(lp - el.raan);
    el.M0 = wrap_2pi(mean_from_true(wrap_2pi(x.L - lp), e));
    el.ref_epoch = ref;
    return el;
}

inline CartesianState mee_to_cart(const EquinoctialState& x, const Constants& c = default_constants()) {
    const double mu = c.mu_sun;
    const double cL = std::cos(x.L), sL = std::sin(x.L);
    const double w = 1.0 + x.f * cL + x.g * sL;
    const double r = x.p / w;
    const double s2 = 1.0 + x.h * x.h + x.k * x.k;
    const double a2 = x.h * x.h - x.k * x.k;
    const double hk = 2.0 * x.h * x.k;
    const double sq = std::sqrt(mu / x.p);
    CartesianState s;
    s.r = Vec3(r / s2 * (cL + a2 * cL + hk * sL), r / s2 * (sL - a2 * sL + hk * cL),
               2.0 * r / s2 * (x.h * sL - x.k * cL));
    s.v = Vec3(-sq / s2 * (sL + a2 * sL - hk * cL + x.g - x.f * hk + a2 * x.g),
               -sq / s2 * (-cL + a2 * cL + hk * sL - x.f + x.g * hk + a2 * x.f),
               2.0 * sq / s2 * (x.h * cL + x.k * sL + x.f * x.h + x.g * x.k));
    return s;
}

inline EquinoctialState cart_to_mee(const CartesianState& s, const Constants& c = default_constants()) {
    const double mu = c.mu_sun;
    const double r = s.r.norm();
    const Vec3 hv = s.r.cross(s.v);
    const double h = hv.norm();
    if (!(r > 0.0) || !(h > 0.0)) throw InputError("cart_to_mee: singular state");
    const Vec3 hh = hv / h;
    if (hh.z() <= -1.0 + 1e-14) throw InputError("cart_to_mee: retrograde equatorial orbit is singular");
    EquinoctialState x;
    x.p = h * h / mu;
    x.h = -hh.y() / (1.0 + hh.z());
    x.k = hh.x() / (1.0 + hh.z());
    const double s2 = 1.0 + x.h * x.h + x.k * x.k;
    const Vec3 fhat(1.0 - x.k * x.k + x.h * x.h, 2.0 * x.h * x.k, -2.0 * x.k);
    const Vec3 ghat(2.0 * x.h * x.k, 1.0 + x.k * x.k - x.h * x.h, 2.0 * x.h);
    const Vec3 fh = fhat / s2, gh = ghat / s2;
    const Vec3 ev = s.v.cross(hv) / mu - s.r / r;
    x.f = ev.dot(fh);
    x.g = ev.dot(gh);
    x.L = wrap_2pi(std::atan2(s.r.dot(gh), s.r.dot(fh)));
    return x;
}

namespace detail {
// Stumpff functions C(z), S(z).
inline void stumpff(double z, double& C, double& S) {
    if (std::abs(z) < 0.1) {
        double tc = 0.5, ts = 1.0 / 6.0;
        C = tc;
        S = ts;
        for (int k = 1; k < 12; ++k) {
            tc *= -z / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
            ts *= -z / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
            C += tc;
            S += ts;
        }
    } else if (z > 0.0) {
        const double sz = std::sqrt(z);
        const double sh = std::sin(sz / 2.0);
        C = 2.0 * sh * sh / z;
        S = (sz - std::sin(sz)) / (z * sz);
    } else {
        const double sz = std::sqrt(-z);
        const double sh = std::sinh(sz / 2.0);
        C = 2.0 * sh * sh / (-z);
        S = (std::sinh(sz) - sz) / (-z * sz);
    }
}
}  // namespace detail

/// Universal-variable two-body propagation of (r0, v0) by dt seconds; any conic.
inline std::pair<Vec3, Vec3> propagate_state(const Vec3& r0v, const Vec3& v0v, double dt, double mu) {
    const double r0 = r0v.norm();
    const double v0s = v0v.squaredNorm();
    const double alpha = 2.0 / r0 - v0s / mu;  // 1/a
    const double sqmu = std::sqrt(mu);
    const double rv = r0v.dot(v0v) / sqmu;
    if (alpha > 1e-14 / r0) {
        // Reduce dt modulo the period.
        const double P = kTwoPi / std::sqrt(mu * alpha * alpha * alpha);
        dt = std::fmod(dt, P);
    }
    if (dt == 0.0) return {r0v, v0v};

    double chi;
    if (alpha > 0.0) {
        chi = sqmu * dt * alpha;
    } else {
        chi = sqmu * dt / r0;
    }
    auto eval = [&](double x, double& F, double& dF, double& d2F, double& C, double& S) {
        const double z = alpha * x * x;
        detail::stumpff(z, C, S);
        F = rv * x * x * C + (1.0 - alpha * r0) * x * x * x * S + r0 * x - sqmu * dt;
        dF = rv * x * (1.0 - z * S) + (1.0 - alpha * r0) * x * x * C + r0;
        d2F = rv * (1.0 - z * C) + (1.0 - alpha * r0) * x * (1.0 - z * S);
    };
    double F, dF, d2F, C, S;
    bool ok = false;
    for (int it = 0; it < 200; ++it) {
        eval(chi, F, dF, d2F, C, S);
        const double n = 5.0;
        const double disc = std::sqrt(std::abs((n - 1.0) * (n - 1.0) * dF * dF - n * (n - 1.0) * F * d2F));
        const double den = dF + (dF >= 0.0 ? disc : -disc);
        const double step = n * F / den;
        chi -= step;
        if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(chi))) {
            ok = true;
            break;
        }
    }
    if (!ok) throw ConvergenceError("propagate_state: universal Kepler equation did not converge", std::abs(F));
    const double z = alpha * chi * chi;
    detail::stumpff(z, C, S);
    const double f = 1.0 - chi * chi * C / r0;
    const double g = dt - chi * chi * chi * S / sqmu;
    const Vec3 r = f * r0v + g * v0v;
    const double rn = r.norm();
    const double fd = sqmu / (rn * r0) * (z * chi * S - chi);
    const double gd = 1.0 - chi * chi * C / rn;
    return {r, fd * r0v + gd * v0v};
}

/// Minimum heliocentric distance along the forward conic arc (r0, v0) of length dt >= 0.
inline double arc_min_radius(const Vec3& r0v, const Vec3& v0v, double dt, double mu) {
    const double r0 = r0v.norm();
    const auto [r1v, v1v] = propagate_state(r0v, v0v, dt, mu);
    double rmin = std::min(r0, r1v.norm());
    const Vec3 hv = r0v.cross(v0v);
    const Vec3 ev = v0v.cross(hv) / mu - r0v / r0;
    const double e = ev.norm();
    const double p = hv.squaredNorm() / mu;
    const double rp = p / (1.0 + e);
    if (e < 1e-12) return rmin;
    const double alpha = 2.0 / r0 - v0v.squaredNorm() / mu;
    const double nu = std::atan2(hv.normalized().dot(ev.cross(r0v)) / e, ev.dot(r0v) / e);
    double t_peri;
    if (alpha > 0.0) {
        const double a = 1.0 / alpha;
        const double n = std::sqrt(mu / (a * a * a));
        const double M = wrap_2pi(mean_from_true(nu, e));
        t_peri = M == 0.0 ? 0.0 : (kTwoPi - M) / n;
    } else {
        if (nu >= 0.0) return rmin;  // receding on an open conic
        const double a = -1.0 / alpha;
        const double n = std::sqrt(mu / (a * a * a));
        const double H = 2.0 * std::atanh(std::sqrt((e - 1.0) / (e + 1.0)) * std::tan(nu / 2.0));
        t_peri = -(e * std::sinh(H) - H) / n;
    }
    if (t_peri <= dt) rmin = std::min(rmin, rp);
    return rmin;
}

}  // namespace dyson
