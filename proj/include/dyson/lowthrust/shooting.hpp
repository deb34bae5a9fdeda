#pragma once

// Indirect shooting for constant-acceleration transfers: an energy-optimal
// warm start followed by time-optimal solves with free or phased final
// longitude. Shooting Jacobians come from dual numbers carried through the
// integrator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dyson/astro/ring.hpp"
#include "dyson/core/log.hpp"
#include "dyson/core/newton.hpp"
#include "dyson/core/ode.hpp"
#include "dyson/core/rng.hpp"
#include "dyson/lowthrust/dynamics.hpp"

namespace dyson::lowthrust {

/// Equinoctial state (physical units) with its costates (canonical units).
struct AugmentedState {
    EquinoctialState x;
    Vec6<double> lam{};
};

struct EnergySolution {
    AugmentedState start;
    double dt_days = 0.0;  // flight time after the dv = f dt adjustment
    double dv = 0.0;       // km/s, f * integral of tau
    int iterations = 0;    // Newton iterations summed over all solves
    int attempts = 0;      // initial costate guesses tried
};

struct TransferSolution {
    Epoch t0, tf;
    Vec6<double> lam0{};
    double dv_equiv = 0.0;            // km/s
    std::array<double, 5> target{};   // p [km], f, g, h, k
    int iterations = 0;
    double residual = 0.0;
    double L_final = 0.0;             // asteroid true longitude at tf (continuous from t0)
};

/// Starting point for a time-optimal solve.
struct WarmStart {
    Vec6<double> lam{};
    double dt_days = 0.0;
};

struct ShootingOptions {
    ode::Options ode{};
    int max_iter = 40;
    double energy_tol = 1e-8;
    double time_tol = 1e-10;
    double rendezvous_tol = 1e-9;
    int dt_iterations = 6;
    double dt_tol = 1e-3;
    int multistarts = 12;
    std::uint64_t seed = 1;
};

inline Vec6<double> start_state(const KeplerianElements& el, Epoch t0, const Constants& c = default_constants()) {
    return to_canonical(cart_to_mee(propagate_kepler(el, t0, c), c), c);
}

inline std::array<double, 5> canonical_slow(const std::array<double, 5>& q, const Constants& c) {
    return {q[0] / c.au, q[1], q[2], q[3], q[4]};
}

namespace detail {

template <class S>
using Aug = std::array<S, 12>;

/// Integrates state and costates over normalized time s in [0, 1].
template <class S>
Aug<S> fly_time_optimal(const Vec6<double>& x0, const Vec6<S>& lam0, const S& T, double f, const ode::Options& o,
                        ode::Stats* stats = nullptr) {
    Aug<S> y;
    for (int i = 0; i < 6; ++i) {
        y[i] = S(x0[i]);
        y[6 + i] = lam0[i];
    }
    auto rhs = [&](double, const Aug<S>& z) {
        Vec6<S> x, lam, dx, dl;
        for (int i = 0; i < 6; ++i) {
            x[i] = z[i];
            lam[i] = z[6 + i];
        }
        time_optimal_rates(x, lam, f, dx, dl);
        Aug<S> r;
        for (int i = 0; i < 6; ++i) {
            r[i] = T * dx[i];
            r[6 + i] = T * dl[i];
        }
        return r;
    };
    return ode::integrate(rhs, 0.0, 1.0, y, o, stats);
}

template <class S>
Vec6<S> fly_energy(const Vec6<double>& x0, const Vec6<S>& lam, double T, double f, const ode::Options& o) {
    Vec6<S> y;
    for (int i = 0; i < 6; ++i) y[i] = S(x0[i]);
    auto rhs = [&](double, const Vec6<S>& z) { return energy_rates(z, lam, f); };
    return ode::integrate(rhs, 0.0, T, y, o);
}

/// Integral of tau = |B^T lam| along the energy arc.
inline double energy_tau_integral(const Vec6<double>& x0, const Vec6<double>& lam, double T, double f,
                                  const ode::Options& o) {
    std::array<double, 7> y{};
    for (int i = 0; i < 6; ++i) y[i] = x0[i];
    auto rhs = [&](double, const std::array<double, 7>& z) {
        Vec6<double> x;
        for (int i = 0; i < 6; ++i) x[i] = z[i];
        const auto dx = energy_rates(x, lam, f);
        std::array<double, 7> r;
        for (int i = 0; i < 6; ++i) r[i] = dx[i];
        r[6] = norm3(b_transpose_lambda(mee_matrices(x), lam));
        return r;
    };
    return ode::integrate(rhs, 0.0, T, y, o)[6];
}

inline double final_longitude(const Vec6<double>& x0, const Vec6<double>& lam, double T, double f,
                               const ode::Options& o) {
    if (!(T > 0.0)) return x0[5];
    return fly_time_optimal<double>(x0, lam, T, f, o)[5];
}

inline NewtonResult<5> energy_shoot(const Vec6<double>& x0, const std::array<double, 5>& tgt, double f, double T,
                                    const VecN<5>& guess, const ShootingOptions& opt) {
    using S = ad::Dual<double, 5>;
    auto system = [&](const VecN<5>& u, MatN<5>* J) -> VecN<5> {
        Vec6<S> lam;
        for (int i = 0; i < 5; ++i) lam[i] = S::variable(u[i], i);
        lam[5] = S(0.0);
        const auto y = fly_energy(x0, lam, T, f, opt.ode);
        VecN<5> r;
        for (int i = 0; i < 5; ++i) {
            r[i] = y[i].v - tgt[i];
            if (J)
                for (int j = 0; j < 5; ++j) (*J)(i, j) = y[i].d[j];
        }
        return r;
    };
    NewtonOptions no;
    no.tol = opt.energy_tol;
    no.max_iter = opt.max_iter;
    return newton_solve<5>(system, guess, no);
}

inline double slow_mismatch(const Vec6<double>& x0, const std::array<double, 5>& tgt) {
    double m = 0.0;
    for (int i = 0; i < 5; ++i) m = std::max(m, std::abs(x0[i] - tgt[i]));
    return m;
}

/// Scales lam so that the time-optimal Hamiltonian vanishes at x0 when a
/// positive factor can achieve it.
inline Vec6<double> normalize_costates(const Vec6<double>& x0, Vec6<double> lam, double f) {
    const double d = hamiltonian_time_optimal(x0, lam, f) - 1.0;
    if (d < 0.0)
        for (auto& v : lam) v *= -1.0 / d;
    return lam;
}

/// Shooting function for the free-longitude problem. Unknowns: lam0 (6)
/// and the canonical flight time. Residuals: five slow elements, f lam_L(tf)
/// and H(t0) (H is constant along the arc).
inline auto free_L_system(const Vec6<double>& x0, const std::array<double, 5>& tgt, double f, const ode::Options& o) {
    return [=](const VecN<7>& u, MatN<7>* J) -> VecN<7> {
        using S = ad::Dual<double, 7>;
        if (!(u[6] > 0.0)) throw InputError("non-positive flight time");
        Vec6<S> lam;
        for (int i = 0; i < 6; ++i) lam[i] = S::variable(u[i], i);
        const S T = S::variable(u[6], 6);
        const auto y = fly_time_optimal(x0, lam, T, f, o);
        Vec6<S> xs;
        for (int i = 0; i < 6; ++i) xs[i] = S(x0[i]);
        std::array<S, 7> r;
        for (int i = 0; i < 5; ++i) r[i] = y[i] - tgt[i];
        r[5] = f * y[11];
        r[6] = hamiltonian_time_optimal(xs, lam, f);
        VecN<7> v;
        for (int i = 0; i < 7; ++i) {
            v[i] = r[i].v;
            if (J)
                for (int j = 0; j < 7; ++j) (*J)(i, j) = r[i].d[j];
        }
        return v;
    };
}

/// Shooting function for the phased rendezvous: six elements (longitude via
/// sin((L - L_S)/2)) and H(t0) - n_D lam_L(tf).
inline auto rendezvous_system(const Vec6<double>& x0, const std::array<double, 5>& tgt, double f, double nD,
                              double LS0, const ode::Options& o) {
    return [=](const VecN<7>& u, MatN<7>* J) -> VecN<7> {
        using S = ad::Dual<double, 7>;
        if (!(u[6] > 0.0)) throw InputError("non-positive flight time");
        Vec6<S> lam;
        for (int i = 0; i < 6; ++i) lam[i] = S::variable(u[i], i);
        const S T = S::variable(u[6], 6);
        const auto y = fly_time_optimal(x0, lam, T, f, o);
        Vec6<S> xs;
        for (int i = 0; i < 6; ++i) xs[i] = S(x0[i]);
        std::array<S, 7> r;
        for (int i = 0; i < 5; ++i) r[i] = y[i] - tgt[i];
        r[5] = ad::sin(0.5 * (y[5] - LS0 - nD * T));
        r[6] = hamiltonian_time_optimal(xs, lam, f) - nD * y[11];
        VecN<7> v;
        for (int i = 0; i < 7; ++i) {
            v[i] = r[i].v;
            if (J)
                for (int j = 0; j < 7; ++j) (*J)(i, j) = r[i].d[j];
        }
        return v;
    };
}

}  // namespace detail

/// Energy-optimal transfer with free final longitude. The flight time is
/// iterated from dt_guess until the transfer's dv matches f times its duration.
inline EnergySolution solve_energy_optimal(const KeplerianElements& el0, Epoch t0,
                                           const std::array<double, 5>& target_slow, double dt_guess_days,
                                           const ShootingOptions& opt = {},
                                           const Constants& c = default_constants()) {
    if (!(dt_guess_days > 0.0) || !std::isfinite(dt_guess_days))
        throw InputError("solve_energy_optimal: dt_guess must be positive");
    const Canonical cu(c);
    const double f = canonical_f(c);
    const Vec6<double> x0 = start_state(el0, t0, c);
    const auto tgt = canonical_slow(target_slow, c);

    EnergySolution out;
    out.start.x = from_canonical(x0, c);
    if (detail::slow_mismatch(x0, tgt) < opt.energy_tol) return out;

    double T = cu.from_days(dt_guess_days);
    VecN<5> guess = VecN<5>::Zero();
    Rng rng(opt.seed);
    double best_res = INFINITY;
    double T_prev = 0.0, g_prev = 0.0;
    bool prev_ok = false;
    for (int it = 0; it < opt.dt_iterations; ++it) {
        std::optional<NewtonResult<5>> sol;
        for (int a = 0; a <= opt.multistarts && !sol; ++a) {
            VecN<5> g = guess;
            if (a > 0) {
                VecN<5> d;
                for (int i = 0; i < 5; ++i) d[i] = rng.normal();
                g = d.normalized() * std::pow(10.0, rng.uniform(-3.0, 0.0));
            }
            ++out.attempts;
            try {
                auto r = detail::energy_shoot(x0, tgt, f, T, g, opt);
                out.iterations += r.iterations;
                best_res = std::min(best_res, r.residual.template lpNorm<Eigen::Infinity>());
                if (r.converged) sol = r;
            } catch (const Error&) {
            }
        }
        if (!sol) throw ConvergenceError("solve_energy_optimal: shooting did not converge", best_res);

        Vec6<double> lam{};
        for (int i = 0; i < 5; ++i) lam[i] = sol->x[i];
        const double q = detail::energy_tau_integral(x0, lam, T, f, opt.ode);
        const double raw = std::sqrt(T * q);
        if (std::abs(raw / T - 1.0) < opt.dt_tol) {
            out.start.lam = lam;
            out.dt_days = cu.days(T);
            out.dv = f * q * cu.speed;
            return out;
        }
        // Fixed-point step, accelerated by a secant on raw(T) - T once two
        // unclamped iterates are available.
        const double g = raw - T;
        double Tn = raw;
        const bool clamped = raw < 0.5 * T || raw > 2.0 * T;
        if (!clamped && prev_ok && g != g_prev) Tn = T - g * (T - T_prev) / (g - g_prev);
        Tn = std::clamp(Tn, 0.5 * T, 2.0 * T);
        log::debug("lowthrust: energy dt ", cu.days(T), " -> ", cu.days(Tn));
        prev_ok = !clamped;
        T_prev = T;
        g_prev = g;
        T = Tn;
        guess = sol->x;
    }
    throw ConvergenceError("solve_energy_optimal: flight time adjustment did not settle", best_res);
}

inline WarmStart warm_start(const EnergySolution& e) { return WarmStart{e.start.lam, e.dt_days}; }

/// Time-optimal transfer to the target's five slow elements with free final
/// longitude. Unknowns: initial costates and flight time.
inline TransferSolution solve_time_optimal_free_L(const KeplerianElements& el0, Epoch t0,
                                                  const std::array<double, 5>& target_slow, const WarmStart& warm,
                                                  const ShootingOptions& opt = {},
                                                  const Constants& c = default_constants()) {
    const Canonical cu(c);
    const double f = canonical_f(c);
    const Vec6<double> x0 = start_state(el0, t0, c);
    const auto tgt = canonical_slow(target_slow, c);

    TransferSolution out;
    out.t0 = t0;
    out.target = target_slow;
    if (detail::slow_mismatch(x0, tgt) < opt.time_tol) {
        // Already on the target orbit: zero flight time; costates chosen so that H = 0.
        const auto m = mee_matrices(x0);
        out.lam0 = {1.0 / (f * m.B[0][1]), 0, 0, 0, 0, 0};
        out.tf = t0;
        out.L_final = x0[5];
        return out;
    }
    if (!(warm.dt_days > 0.0)) throw InputError("solve_time_optimal_free_L: warm start needs a positive flight time");

    auto system = detail::free_L_system(x0, tgt, f, opt.ode);

    const auto lam = detail::normalize_costates(x0, warm.lam, f);
    VecN<7> u0;
    for (int i = 0; i < 6; ++i) u0[i] = lam[i];
    u0[6] = cu.from_days(warm.dt_days);
    NewtonOptions no;
    no.tol = opt.time_tol;
    no.max_iter = opt.max_iter;
    const auto r = newton_solve<7>(system, u0, no);
    const double res = r.residual.template lpNorm<Eigen::Infinity>();
    if (!r.converged) throw ConvergenceError("solve_time_optimal_free_L: shooting did not converge", res);
    for (int i = 0; i < 6; ++i) out.lam0[i] = r.x[i];
    out.tf = t0 + cu.days(r.x[6]);
    out.dv_equiv = c.f_atd_kms2() * (out.tf - out.t0) * c.day;
    out.iterations = r.iterations;
    out.residual = res;
    Vec6<double> l0;
    for (int i = 0; i < 6; ++i) l0[i] = r.x[i];
    out.L_final = detail::final_longitude(x0, l0, r.x[6], f, opt.ode);
    return out;
}

/// Time-optimal rendezvous with a ring station: all six elements matched,
/// longitude through sin((L - L_S)/2), and the moving-target transversality
/// condition H - n_D lam_L = 0.
inline TransferSolution solve_time_optimal_rendezvous(const KeplerianElements& el0, Epoch t0, const RingConfig& ring,
                                                      int station, const WarmStart& guess,
                                                      const ShootingOptions& opt = {},
                                                      const Constants& c = default_constants()) {
    if (station < 1 || station > ring.n_stations) throw InputError("solve_time_optimal_rendezvous: bad station index");
    if (!(guess.dt_days > 0.0)) throw InputError("solve_time_optimal_rendezvous: guess needs a positive flight time");
    const Canonical cu(c);
    const double f = canonical_f(c);
    const Vec6<double> x0 = start_state(el0, t0, c);
    const auto slow = ring.slow_elements(c);
    const auto tgt = canonical_slow(slow, c);
    const double nD = ring.mean_motion(c) * cu.time;
    const double LS0 = ring.station_longitude(station, t0, c);

    auto system = detail::rendezvous_system(x0, tgt, f, nD, LS0, opt.ode);

    VecN<7> u0;
    for (int i = 0; i < 6; ++i) u0[i] = guess.lam[i];
    u0[6] = cu.from_days(guess.dt_days);
    NewtonOptions no;
    no.tol = opt.rendezvous_tol;
    no.max_iter = opt.max_iter;
    const auto r = newton_solve<7>(system, u0, no);
    const double res = r.residual.template lpNorm<Eigen::Infinity>();
    if (!r.converged) throw ConvergenceError("solve_time_optimal_rendezvous: shooting did not converge", res);

    TransferSolution out;
    out.t0 = t0;
    out.target = slow;
    for (int i = 0; i < 6; ++i) out.lam0[i] = r.x[i];
    out.tf = t0 + cu.days(r.x[6]);
    out.dv_equiv = c.f_atd_kms2() * (out.tf - out.t0) * c.day;
    out.iterations = r.iterations;
    out.residual = res;
    Vec6<double> l0;
    for (int i = 0; i < 6; ++i) l0[i] = r.x[i];
    out.L_final = detail::final_longitude(x0, l0, r.x[6], f, opt.ode);
    return out;
}

/// One sample of a propagated time-optimal arc.
struct ArcSample {
    Epoch t;
    EquinoctialState x;
    Vec6<double> lam{};
    std::array<double, 3> alpha{};  // thrust direction (RTN)
    double H = 0.0;
};

/// Re-integrates a time-optimal solution from el0 and returns every accepted step.
inline std::vector<ArcSample> propagate_arc(const KeplerianElements& el0, const TransferSolution& s,
                                            const ode::Options& o = {}, const Constants& c = default_constants()) {
    const Canonical cu(c);
    const double f = canonical_f(c);
    const Vec6<double> x0 = start_state(el0, s.t0, c);
    const double T = cu.from_days(s.tf - s.t0);
    std::vector<ArcSample> out;
    auto observe = [&](double sn, const detail::Aug<double>& y) {
        Vec6<double> x, lam;
        for (int i = 0; i < 6; ++i) {
            x[i] = y[i];
            lam[i] = y[6 + i];
        }
        ArcSample a;
        a.t = s.t0 + cu.days(sn * T);
        a.x = from_canonical(x, c);
        a.lam = lam;
        const auto u = optimal_control(x, lam);
        a.alpha = u.alpha;
        a.H = hamiltonian_time(x, lam, u.alpha, f);
        out.push_back(a);
    };
    detail::Aug<double> y;
    for (int i = 0; i < 6; ++i) {
        y[i] = x0[i];
        y[6 + i] = s.lam0[i];
    }
    auto rhs = [&](double, const detail::Aug<double>& z) {
        Vec6<double> x, lam, dx, dl;
        for (int i = 0; i < 6; ++i) {
            x[i] = z[i];
            lam[i] = z[6 + i];
        }
        time_optimal_rates(x, lam, f, dx, dl);
        detail::Aug<double> r;
        for (int i = 0; i < 6; ++i) {
            r[i] = T * dx[i];
            r[6 + i] = T * dl[i];
        }
        return r;
    };
    if (T > 0.0) ode::integrate(rhs, 0.0, 1.0, y, o, nullptr, observe);
    return out;
}

}  // namespace dyson::lowthrust
