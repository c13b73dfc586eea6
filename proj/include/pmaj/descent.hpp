#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "pmaj/errors.hpp"

namespace pmaj {

/// Options shared by every descent-based solver.
struct DescentOptions {
    int max_iters = 20000;
    double grad_tol = 1e-10;
    double backtrack = 0.5;   // step shrink factor, in (0,1)
    double initial_step = 1.0;
    bool project = false;     // nodal projection onto the admissible set

    void validate() const {
        if (!(backtrack > 0.0 && backtrack < 1.0)) throw Error("backtrack factor must be in (0,1)");
        if (!(grad_tol > 0.0) || !(initial_step > 0.0)) throw Error("descent tolerances must be > 0");
    }
};

struct DescentResult {
    std::vector<double> x;
    double value = 0.0;
    int iters = 0;
    bool converged = false;      // projected gradient norm reached grad_tol
    double residual_norm = 0.0;  // final projected gradient norm (l2)
};

namespace vecops {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace vecops

/// Projected gradient descent with Armijo backtracking and Barzilai-Borwein
/// step seeding. `project` maps an arbitrary nodal vector to the admissible
/// set (identity when unconstrained); `direction` may precondition the raw
/// gradient (returns the descent direction to step along, default -g).
///
/// The objective value is non-increasing across accepted steps.
struct DescentProblem {
    std::function<double(const std::vector<double>&)> value;
    std::function<void(const std::vector<double>&, std::vector<double>&)> gradient;
    std::function<void(std::vector<double>&)> project;  // optional
    std::function<void(const std::vector<double>&, std::vector<double>&)> precondition;  // optional
};

inline DescentResult descent_minimize(std::vector<double> x, const DescentProblem& prob,
                                      const DescentOptions& opts) {
    opts.validate();
    auto project = [&](std::vector<double>& v) {
        if (prob.project) prob.project(v);
    };

    project(x);
    double fx = prob.value(x);
    std::vector<double> g(x.size()), dir(x.size()), trial(x.size()), gprev, xprev;
    double step = opts.initial_step;

    DescentResult res;
    for (int it = 0; it < opts.max_iters; ++it) {
        prob.gradient(x, g);

        // Projected-gradient residual: x - P(x - g).
        trial = x;
        vecops::axpy(-1.0, g, trial);
        project(trial);
        double rnorm = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = x[i] - trial[i];
            rnorm += r * r;
        }
        rnorm = std::sqrt(rnorm);
        res.residual_norm = rnorm;
        if (rnorm <= opts.grad_tol) {
            res.converged = true;
            res.iters = it;
            break;
        }

        if (prob.precondition) prob.precondition(g, dir);
        else {
            dir = g;
            for (double& d : dir) d = -d;
        }

        // Barzilai-Borwein step seed from the previous gradient pair.
        if (!xprev.empty()) {
            double sy = 0.0, ss = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double s = x[i] - xprev[i];
                const double y = g[i] - gprev[i];
                sy += s * y;
                ss += s * s;
            }
            if (sy > 0.0 && ss > 0.0) step = std::min(std::max(ss / sy, 1e-12), 1e12);
        }

        xprev = x;
        gprev = g;

        const double slope = vecops::dot(g, dir);  // < 0 for a descent direction
        double t = step;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            trial = x;
            vecops::axpy(t, dir, trial);
            project(trial);
            const double ft = prob.value(trial);
            if (ft <= fx + 1e-4 * t * slope || ft < fx) {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= opts.backtrack;
        }
        if (!accepted) {
            // No decrease along this direction at any tried step.
            res.iters = it;
            break;
        }
        res.iters = it + 1;
    }

    res.x = std::move(x);
    res.value = fx;
    return res;
}

}  // namespace pmaj
