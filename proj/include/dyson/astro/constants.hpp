#pragma once

#include <cmath>
#include <numbers>

namespace dyson {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Physical constants and mission caps. Units: km, s, kg unless noted.
struct Constants {
    double mu_sun = 1.32712440018e11;   // km^3/s^2
    double au = 1.49597870691e8;        // km
    double day = 86400.0;               // s
    double year_days = 365.25;
    double f_atd = 1e-4;                // m/s^2
    double alpha = 6e-9;                // 1/s
    double v_flyby_max = 2.0;           // km/s
    double v_launch_max = 6.0;          // km/s
    double r_min_au = 0.4;
    double a_d_min_au = 0.65;
    double atd_delay_days = 30.0;
    double station_gap_days = 90.0;
    double t_start_mjd = 95739.0;
    double mission_years = 20.0;

    double f_atd_kms2() const { return f_atd * 1e-3; }
    double t_end_mjd() const { return t_start_mjd + mission_years * year_days; }
    bool valid() const {
        return mu_sun > 0 && au > 0 && day > 0 && year_days > 0 && f_atd > 0 && alpha > 0 &&
               v_flyby_max > 0 && v_launch_max > 0 && r_min_au > 0 && a_d_min_au > 0 &&
               atd_delay_days > 0 && station_gap_days > 0 && mission_years > 0;
    }
};

inline const Constants& default_constants() {
    static const Constants c{};
    return c;
}

/// Modified Julian Date on a uniform scale.
struct Epoch {
    double mjd = 0.0;

    constexpr Epoch() = default;
    constexpr explicit Epoch(double d) : mjd(d) {}

    constexpr Epoch operator+(double days) const { return Epoch(mjd + days); }
    constexpr Epoch operator-(double days) const { return Epoch(mjd - days); }
    constexpr double operator-(Epoch o) const { return mjd - o.mjd; }
    constexpr auto operator<=>(const Epoch&) const = default;
    bool finite() const { return std::isfinite(mjd); }
};

/// Wraps an angle to [0, 2pi).
inline double wrap_2pi(double x) {
    x = std::fmod(x, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    return x;
}

/// Wraps an angle to (-pi, pi].
inline double wrap_pi(double x) {
    x = wrap_2pi(x);
    if (x > kPi) x -= kTwoPi;
    return x;
}

}  // namespace dyson
