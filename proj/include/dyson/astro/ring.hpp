#pragma once

#include <cmath>

#include "dyson/astro/kepler.hpp"

namespace dyson {

/// Circular target ring; stations are spaced uniformly in true longitude.
struct RingConfig {
    double a_D = 1.0;     // AU
    double i_D = 0.0;     // rad
    double raan_D = 0.0;  // rad
    double phi_S1 = 0.0;  // rad, station 1 true longitude at the phase reference epoch
    int n_stations = 12;
    double phase_ref_mjd = 95739.0;

    double mean_motion(const Constants& c = default_constants()) const { return dyson::mean_motion(a_D, c); }

    /// True longitude of station s (1-based) at epoch t.
    double station_longitude(int s, Epoch t, const Constants& c = default_constants()) const {
        return phi_S1 + (s - 1) * kTwoPi / n_stations + mean_motion(c) * (t.mjd - phase_ref_mjd) * c.day;
    }

    /// The five slow equinoctial elements (p [km], f, g, h, k) of the ring.
    std::array<double, 5> slow_elements(const Constants& c = default_constants()) const {
        const double t = std::tan(i_D / 2.0);
        return {a_D * c.au, 0.0, 0.0, t * std::cos(raan_D), t * std::sin(raan_D)};
    }

    EquinoctialState station_mee(int s, Epoch t, const Constants& c = default_constants()) const {
        const auto q = slow_elements(c);
        return EquinoctialState{q[0], q[1], q[2], q[3], q[4], station_longitude(s, t, c)};
    }

    CartesianState station_state(int s, Epoch t, const Constants& c = default_constants()) const {
        auto st = mee_to_cart(station_mee(s, t, c), c);
        st.epoch = t;
        return st;
    }

    Vec3 normal() const {
        return Vec3(std::sin(raan_D) * std::sin(i_D), -std::cos(raan_D) * std::sin(i_D), std::cos(i_D));
    }
};

/// Angle between the orbit planes of two element sets (rad).
inline double plane_angle(double i1, double raan1, double i2, double raan2) {
    const Vec3 n1(std::sin(raan1) * std::sin(i1), -std::cos(raan1) * std::sin(i1), std::cos(i1));
    const Vec3 n2(std::sin(raan2) * std::sin(i2), -std::cos(raan2) * std::sin(i2), std::cos(i2));
    return std::atan2(n1.cross(n2).norm(), n1.dot(n2));
}

}  // namespace dyson
