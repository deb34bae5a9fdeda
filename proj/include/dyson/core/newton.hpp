#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "dyson/core/error.hpp"

namespace dyson {

template <int N>
using VecN = Eigen::Matrix<double, N, 1>;
template <int N>
using MatN = Eigen::Matrix<double, N, N>;

struct NewtonOptions {
    double tol = 1e-10;      // on the infinity norm of the residual
    int max_iter = 30;
    int max_backtracks = 12;
    double max_step = 0.0;   // cap on the step infinity norm, 0 disables
};

template <int N>
struct NewtonResult {
    VecN<N> x;
    VecN<N> residual;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Damped Newton iteration. `system(x, jac)` returns the residual and fills
/// the Jacobian when `jac` is non-null. Non-finite residuals count as
/// rejected trial points during backtracking.
template <int N, class System>
NewtonResult<N> newton_solve(System&& system, VecN<N> x, const NewtonOptions& opt = {}) {
    NewtonResult<N> out;
    MatN<N> J;
    VecN<N> r = system(x, &J);
    ++out.evaluations;
    if (!r.allFinite()) throw ConvergenceError("newton: non-finite residual at the initial guess");
    auto merit = [](const VecN<N>& v) { return 0.5 * v.squaredNorm(); };

    for (out.iterations = 0; out.iterations < opt.max_iter; ++out.iterations) {
        if (r.template lpNorm<Eigen::Infinity>() < opt.tol) {
            out.converged = true;
            break;
        }
        VecN<N> step = J.colPivHouseholderQr().solve(-r);
        if (!step.allFinite()) break;
        if (opt.max_step > 0.0) {
            const double m = step.template lpNorm<Eigen::Infinity>();
            if (m > opt.max_step) step *= opt.max_step / m;
        }
        const double f0 = merit(r);
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt <= opt.max_backtracks; ++bt, lambda *= 0.5) {
            const VecN<N> trial = x + lambda * step;
            VecN<N> rt;
            MatN<N> Jt;
            try {
                rt = system(trial, &Jt);
            } catch (const Error&) {
                continue;
            }
            ++out.evaluations;
            if (rt.allFinite() && merit(rt) < (1.0 - 1e-4 * lambda) * f0) {
                x = trial;
                r = rt;
                J = Jt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    if (!out.converged && r.template lpNorm<Eigen::Infinity>() < opt.tol) out.converged = true;
    out.x = x;
    out.residual = r;
    return out;
}

}  // namespace dyson
