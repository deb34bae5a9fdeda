#pragma once

#include <cmath>

#include "dyson/astro/constants.hpp"
#include "dyson/core/error.hpp"

namespace dyson {

struct EdelbaumResult {
    double dv = 0.0;   // km/s
    double tof = 0.0;  // s
};

/// Circle-to-circle low-thrust estimate between radii a0 and a1 (AU) with
/// plane change di (rad), flown at the constant ATD acceleration.
inline EdelbaumResult edelbaum(double a0, double a1, double di, const Constants& c = default_constants()) {
    if (!(a0 > 0.0) || !(a1 > 0.0) || !std::isfinite(di)) throw InputError("edelbaum: invalid radii");
    const double v0 = std::sqrt(c.mu_sun / (a0 * c.au));
    const double v1 = std::sqrt(c.mu_sun / (a1 * c.au));
    EdelbaumResult r;
    const double sh = std::sin(kPi / 4.0 * di);
    // (v0 - v1)^2 + 2 v0 v1 (1 - cos(pi/2 di)), written to avoid cancellation
    r.dv = std::sqrt((v0 - v1) * (v0 - v1) + 4.0 * v0 * v1 * sh * sh);
    r.tof = r.dv / c.f_atd_kms2();
    return r;
}

/// Mass left after dt seconds of ATD thrusting.
inline double asteroid_mass(double m0, double dt, const Constants& c = default_constants()) {
    if (!(dt >= 0.0)) throw InputError("asteroid_mass: negative thrust duration");
    const double k = 1.0 - c.alpha * dt;
    if (!(k > 1e-12)) throw InfeasibleError("asteroid_mass: transfer would deplete the asteroid");
    return m0 * k;
}

}  // namespace dyson
