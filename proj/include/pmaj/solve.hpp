#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "pmaj/descent.hpp"
#include "pmaj/errors.hpp"
#include "pmaj/grid.hpp"
#include "pmaj/nonlocal.hpp"
#include "pmaj/problem.hpp"
#include "pmaj/quadrature.hpp"

namespace pmaj {

enum class ReferenceMethod { analytic_shooting, fine_grid_descent };

inline const char* to_string(ReferenceMethod m) {
    return m == ReferenceMethod::analytic_shooting ? "analytic_shooting" : "fine_grid_descent";
}

/// Near-exact reference solution with an estimated accuracy budget
/// (Richardson-type estimate of the error measure of u_ref itself),
/// propagated into every downstream report.
struct ReferenceSolution {
    P1Function field;
    VectorP1 components;  // vector kind only
    ReferenceMethod provenance = ReferenceMethod::fine_grid_descent;
    double est_accuracy = 0.0;
    bool converged = true;
    int iters = 0;

    // Flux shooting knows the exact flux sigma = c - H at the nodes.
    P1Function exact_flux;
    bool has_exact_flux = false;
};

namespace detail {

/// Thomas solve of a symmetric tridiagonal system (diag d, off-diagonal e).
inline void tridiag_solve(std::vector<double> d, std::vector<double> e, std::vector<double>& rhs) {
    const int n = static_cast<int>(d.size());
    for (int i = 1; i < n; ++i) {
        const double m = e[i - 1] / d[i - 1];
        d[i] -= m * e[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= d[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - e[i] * rhs[i + 1]) / d[i];
}

/// Smooth the raw gradient with one pass of the p=2 stiffness inverse
/// (Dirichlet interior nodes); tames p != 2 ill-conditioning.
inline void laplacian_smooth_dirichlet(const Grid1D& g, const std::vector<double>& grad,
                                       std::vector<double>& dir) {
    const int ni = g.n - 1;
    const double h = g.h();
    std::vector<double> d(ni, 2.0 / h), e(ni - 1, -1.0 / h), rhs(ni);
    for (int i = 0; i < ni; ++i) rhs[i] = -grad[i + 1];
    tridiag_solve(std::move(d), std::move(e), rhs);
    dir.assign(g.num_nodes(), 0.0);
    for (int i = 0; i < ni; ++i) dir[i + 1] = rhs[i];
}

/// Neumann variant: pin the last node, solve the natural-BC system, recenter.
inline void laplacian_smooth_neumann(const Grid1D& g, const std::vector<double>& grad,
                                     std::vector<double>& dir) {
    const int m = g.num_nodes();
    const double h = g.h();
    const int ni = m - 1;  // nodes 0..n-1, node n pinned to 0
    std::vector<double> d(ni), e(ni - 1, -1.0 / h), rhs(ni);
    for (int i = 0; i < ni; ++i) {
        d[i] = (i == 0) ? 1.0 / h : 2.0 / h;
        rhs[i] = -grad[i];
    }
    tridiag_solve(std::move(d), std::move(e), rhs);
    dir.assign(m, 0.0);
    for (int i = 0; i < ni; ++i) dir[i] = rhs[i];
    double mean = 0.0;
    for (int i = 0; i < g.n; ++i) mean += 0.5 * (dir[i] + dir[i + 1]) * h;
    mean /= g.length();
    for (double& x : dir) x -= mean;
}

struct ShootingData {
    std::vector<double> quad_x, quad_w, quad_H;  // per quadrature point, H near-exact
    std::vector<double> node_H;                  // H at the grid nodes
    double Hmax = 0.0;
};

/// H(x) = int_a^x h with nested per-cell Gauss evaluation (no P1
/// interpolation error inside cells).
inline ShootingData shooting_tables(const CoeffFn& h, const Grid1D& grid, int order) {
    const GaussRule gauss(order);
    ShootingData sd;
    sd.node_H.assign(grid.num_nodes(), 0.0);
    for (int cell = 0; cell < grid.n; ++cell) {
        const double x0 = grid.node(cell), x1 = grid.node(cell + 1);
        const double len = x1 - x0;
        for (int k = 0; k < order; ++k) {
            const double xg = x0 + gauss.points[k] * len;
            double inner = 0.0;
            const double sub = xg - x0;
            for (int j = 0; j < order; ++j)
                inner += gauss.weights[j] * sub * h.eval(x0 + gauss.points[j] * sub);
            sd.quad_x.push_back(xg);
            sd.quad_w.push_back(gauss.weights[k] * len);
            sd.quad_H.push_back(sd.node_H[cell] + inner);
        }
        double full = 0.0;
        for (int j = 0; j < order; ++j)
            full += gauss.weights[j] * len * h.eval(x0 + gauss.points[j] * len);
        sd.node_H[cell + 1] = sd.node_H[cell] + full;
    }
    for (double v : sd.node_H) sd.Hmax = std::max(sd.Hmax, std::abs(v));
    for (double v : sd.quad_H) sd.Hmax = std::max(sd.Hmax, std::abs(v));
    return sd;
}

inline P1Function shoot_once(double p, const CoeffFn& h, const Grid1D& grid, int order,
                             std::vector<double>* sigma_nodes) {
    const double pc = p_conjugate(p);
    const ShootingData sd = shooting_tables(h, grid, order);

    auto total_uprime = [&](double c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < sd.quad_x.size(); ++k)
            acc += sd.quad_w[k] * signed_power(c - sd.quad_H[k], pc);
        return acc;
    };

    double lo = -sd.Hmax - 1.0, hi = sd.Hmax + 1.0;
    if (!(total_uprime(lo) <= 0.0 && total_uprime(hi) >= 0.0))
        throw BisectionFailure("flux constant bracket failed (load not integrable?)");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total_uprime(mid) <= 0.0 ? lo : hi) = mid;
    }
    const double c = 0.5 * (lo + hi);

    std::vector<double> u(grid.num_nodes(), 0.0);
    std::size_t k = 0;
    for (int cell = 0; cell < grid.n; ++cell) {
        double acc = 0.0;
        for (int q = 0; q < order; ++q, ++k)
            acc += sd.quad_w[k] * signed_power(c - sd.quad_H[k], pc);
        u[cell + 1] = u[cell] + acc;
    }
    // remove the bisection-tolerance drift so u(b) = 0 exactly
    const double drift = u[grid.n];
    for (int i = 0; i <= grid.n; ++i) u[i] -= drift * (grid.node(i) - grid.a) / grid.length();

    if (sigma_nodes) {
        sigma_nodes->assign(grid.num_nodes(), 0.0);
        for (int i = 0; i <= grid.n; ++i) (*sigma_nodes)[i] = c - sd.node_H[i];
    }
    return P1Function(grid, std::move(u));
}

/// ||grad(coarse - fine)||_p with the coarse field prolonged to the fine grid.
inline double grad_lp_distance(const P1Function& coarse, const P1Function& fine, double p) {
    double acc = 0.0;
    for (int cell = 0; cell < fine.grid.n; ++cell) {
        const double xm = fine.grid.midpoint(cell);
        const int ccell = std::min(static_cast<int>((xm - coarse.grid.a) / coarse.grid.h()),
                                   coarse.grid.n - 1);
        acc += fine.grid.h() * std::pow(std::abs(coarse.slope(ccell) - fine.slope(cell)), p);
    }
    return std::pow(acc, 1.0 / p);
}

inline ReferenceSolution minimize_energy_single(const ProblemSpec& spec, const P1Function& init,
                                                const DescentOptions& opts,
                                                const QuadratureRule& rule) {
    check_same_grid(spec.grid, init.grid, "minimize_energy");
    const Grid1D& g = spec.grid;
    const double p = spec.p;
    const double h = g.h();
    const int m = g.num_nodes();

    const std::vector<double> loadvec = assemble_load(spec.load(), g, rule);

    // cell weights: int_cell a(x) dx for the anisotropic kind, else h
    std::vector<double> cellw(g.n, h);
    if (spec.kind == ProblemKind::anisotropic1d)
        for (int cell = 0; cell < g.n; ++cell) {
            double acc = 0.0;
            rule.over_interval(g.node(cell), g.node(cell + 1),
                               [&](double x, double w) { acc += w * spec.a->eval(x); });
            cellw[cell] = acc;
        }

    std::vector<double> phi_nodes;
    if (spec.kind == ProblemKind::obstacle) {
        phi_nodes.resize(m);
        for (int i = 0; i < m; ++i) phi_nodes[i] = spec.phi->eval(g.node(i));
    }

    DescentProblem prob;
    prob.value = [&, p, h](const std::vector<double>& v) {
        double grad_term = 0.0;
        for (int i = 0; i < g.n; ++i)
            grad_term += cellw[i] * std::pow(std::abs((v[i + 1] - v[i]) / h), p);
        double load_term = 0.0;
        for (int j = 0; j < m; ++j) load_term += loadvec[j] * v[j];
        return grad_term / p - load_term;
    };
    prob.gradient = [&, p, h](const std::vector<double>& v, std::vector<double>& grad) {
        grad.assign(m, 0.0);
        for (int i = 0; i < g.n; ++i) {
            const double t = cellw[i] * signed_power((v[i + 1] - v[i]) / h, p) / h;
            grad[i] -= t;
            grad[i + 1] += t;
        }
        for (int j = 0; j < m; ++j) grad[j] -= loadvec[j];
        if (spec.kind != ProblemKind::neumann_poisson) grad.front() = grad.back() = 0.0;
    };
    prob.project = [&](std::vector<double>& v) {
        if (spec.kind == ProblemKind::neumann_poisson) {
            double mean = 0.0;
            for (int i = 0; i < g.n; ++i) mean += 0.5 * (v[i] + v[i + 1]) * h;
            mean /= g.length();
            for (double& x : v) x -= mean;
        } else {
            v.front() = v.back() = 0.0;
            if (spec.kind == ProblemKind::obstacle)
                for (int i = 0; i < m; ++i) v[i] = std::max(v[i], phi_nodes[i]);
        }
    };
    if (spec.kind == ProblemKind::dirichlet_poisson || spec.kind == ProblemKind::anisotropic1d) {
        prob.precondition = [&](const std::vector<double>& grad, std::vector<double>& dir) {
            laplacian_smooth_dirichlet(g, grad, dir);
        };
    } else if (spec.kind == ProblemKind::neumann_poisson) {
        prob.precondition = [&](const std::vector<double>& grad, std::vector<double>& dir) {
            laplacian_smooth_neumann(g, grad, dir);
        };
    }
    // obstacle: plain projected gradient, preconditioning skips the constraint

    auto res = descent_minimize(init.values, prob, opts);

    ReferenceSolution ref;
    ref.field = P1Function(g, std::move(res.x));
    ref.provenance = ReferenceMethod::fine_grid_descent;
    ref.converged = res.converged;
    ref.iters = res.iters;
    return ref;
}

}  // namespace detail

/// Dirichlet reference by 1D flux integration: sigma(x) = c - H(x) with the
/// scalar c found by bisection (the integral of u' = |sigma|^{p'-2} sigma
/// over the interval is monotone in c), then nodal values by quadrature.
inline ReferenceSolution solve_dirichlet_flux_shooting(double p, const CoeffFn& h,
                                                       const Grid1D& grid, int order = 5) {
    if (!(p > 1.0)) throw Error("flux shooting needs p > 1");
    ReferenceSolution ref;
    std::vector<double> sigma;
    ref.field = detail::shoot_once(p, h, grid, order, &sigma);
    ref.exact_flux = P1Function(grid, std::move(sigma));
    ref.has_exact_flux = true;
    ref.provenance = ReferenceMethod::analytic_shooting;

    const Grid1D fine(grid.a, grid.b, 2 * grid.n);
    const P1Function u2 = detail::shoot_once(p, h, fine, order, nullptr);
    ref.est_accuracy = 2.0 * detail::grad_lp_distance(ref.field, u2, p);
    return ref;
}

/// Projected gradient descent with backtracking on the discrete energy.
/// Handles dirichlet_poisson, neumann_poisson, obstacle, anisotropic1d.
/// Gradients are smoothed by one pass of the discrete Laplacian inverse
/// except for the obstacle kind (plain projected gradient there). The energy
/// is non-increasing across accepted steps. On iteration exhaustion the best
/// iterate is returned with converged = false.
inline ReferenceSolution minimize_energy(const ProblemSpec& spec, const P1Function& init,
                                         const DescentOptions& opts,
                                         const QuadratureRule& rule = QuadratureRule(5),
                                         bool with_accuracy_estimate = true) {
    ReferenceSolution ref = detail::minimize_energy_single(spec, init, opts, rule);
    if (with_accuracy_estimate) {
        const Grid1D fine(spec.grid.a, spec.grid.b, 2 * spec.grid.n);
        const ProblemSpec fspec = spec.with_grid(fine);
        std::vector<double> finit(fine.num_nodes());
        for (int i = 0; i <= fine.n; ++i) finit[i] = ref.field(fine.node(i));
        const ReferenceSolution fref =
            detail::minimize_energy_single(fspec, P1Function(fine, std::move(finit)), opts, rule);
        ref.est_accuracy = 2.0 * detail::grad_lp_distance(ref.field, fref.field, spec.p);
    }
    return ref;
}

/// Vector Poisson reference: descent on the stacked nodal values with the
/// coupled pointwise magnitude |grad v| across components.
inline ReferenceSolution minimize_energy_vector(const ProblemSpec& spec, const VectorP1& init,
                                                const DescentOptions& opts,
                                                const QuadratureRule& rule = QuadratureRule(5),
                                                bool with_accuracy_estimate = true) {
    if (spec.kind != ProblemKind::vector_poisson)
        throw ShapeMismatch("minimize_energy_vector: wrong kind");
    const Grid1D& g = spec.grid;
    const int m = g.num_nodes();
    const int nc = spec.n_comp;
    if (static_cast<int>(init.size()) != nc) throw ShapeMismatch("init components");
    const double p = spec.p;
    const double h = g.h();

    std::vector<std::vector<double>> loads(nc);
    for (int k = 0; k < nc; ++k) loads[k] = assemble_load(spec.h[k], g, rule);

    auto slopes_at = [&](const std::vector<double>& x, int cell, std::vector<double>& s) {
        for (int k = 0; k < nc; ++k) {
            const double* vk = x.data() + static_cast<std::size_t>(k) * m;
            s[k] = (vk[cell + 1] - vk[cell]) / h;
        }
    };

    DescentProblem prob;
    prob.value = [&, p, h](const std::vector<double>& x) {
        double grad_term = 0.0;
        std::vector<double> s(nc);
        for (int cell = 0; cell < g.n; ++cell) {
            slopes_at(x, cell, s);
            double mag2 = 0.0;
            for (double sv : s) mag2 += sv * sv;
            grad_term += h * std::pow(mag2, p / 2.0);
        }
        double load_term = 0.0;
        for (int k = 0; k < nc; ++k)
            for (int j = 0; j < m; ++j) load_term += loads[k][j] * x[k * m + j];
        return grad_term / p - load_term;
    };
    prob.gradient = [&, p, h](const std::vector<double>& x, std::vector<double>& grad) {
        grad.assign(x.size(), 0.0);
        std::vector<double> s(nc);
        for (int cell = 0; cell < g.n; ++cell) {
            slopes_at(x, cell, s);
            double mag2 = 0.0;
            for (double sv : s) mag2 += sv * sv;
            const double factor = mag2 == 0.0 ? 0.0 : std::pow(mag2, (p - 2.0) / 2.0);
            for (int k = 0; k < nc; ++k) {
                const double t = factor * s[k];  // cell flux component
                grad[k * m + cell] -= t;
                grad[k * m + cell + 1] += t;
            }
        }
        for (int k = 0; k < nc; ++k) {
            for (int j = 0; j < m; ++j) grad[k * m + j] -= loads[k][j];
            grad[k * m] = grad[k * m + m - 1] = 0.0;
        }
    };
    prob.project = [&](std::vector<double>& x) {
        for (int k = 0; k < nc; ++k) x[k * m] = x[k * m + m - 1] = 0.0;
    };
    prob.precondition = [&](const std::vector<double>& grad, std::vector<double>& dir) {
        dir.assign(grad.size(), 0.0);
        std::vector<double> gk(m), dk;
        for (int k = 0; k < nc; ++k) {
            std::copy(grad.begin() + k * m, grad.begin() + (k + 1) * m, gk.begin());
            detail::laplacian_smooth_dirichlet(g, gk, dk);
            std::copy(dk.begin(), dk.end(), dir.begin() + k * m);
        }
    };

    std::vector<double> x0(static_cast<std::size_t>(nc) * m, 0.0);
    for (int k = 0; k < nc; ++k)
        std::copy(init[k].values.begin(), init[k].values.end(), x0.begin() + k * m);

    auto res = descent_minimize(std::move(x0), prob, opts);

    ReferenceSolution ref;
    ref.components.clear();
    for (int k = 0; k < nc; ++k) {
        std::vector<double> vk(res.x.begin() + k * m, res.x.begin() + (k + 1) * m);
        ref.components.emplace_back(g, std::move(vk));
    }
    ref.field = ref.components.front();
    ref.provenance = ReferenceMethod::fine_grid_descent;
    ref.converged = res.converged;
    ref.iters = res.iters;

    if (with_accuracy_estimate) {
        const Grid1D fine(g.a, g.b, 2 * g.n);
        const ProblemSpec fspec = spec.with_grid(fine);
        VectorP1 finit;
        for (int k = 0; k < nc; ++k) {
            std::vector<double> fv(fine.num_nodes());
            for (int i = 0; i <= fine.n; ++i) fv[i] = ref.components[k](fine.node(i));
            finit.emplace_back(fine, std::move(fv));
        }
        const ReferenceSolution fref = minimize_energy_vector(fspec, finit, opts, rule, false);
        double est = 0.0;
        for (int k = 0; k < nc; ++k) {
            const double d = detail::grad_lp_distance(ref.components[k], fref.components[k], p);
            est += std::pow(d, p);
        }
        ref.est_accuracy = 2.0 * std::pow(est, 1.0 / p);
    }
    return ref;
}

/// Clamped fourth-order reference (m = 2). For p = 2 the solution is
/// recovered exactly (to quadrature) from the kernel representation
///   u(x) = (1/6) int_a^x (x-t)^3 h(t) dt + alpha (x-a)^2 + beta (x-a)^3,
/// with alpha, beta solving the two clamped conditions at b. For p != 2,
/// descent on the discrete energy (1/p) sum h_cell |D2 v|^p - <h, v> over
/// nodal values with v_0 = v_1 = v_{n-1} = v_n = 0, preconditioned by the
/// discrete clamped biharmonic inverse.
inline ReferenceSolution solve_polyharmonic_1d(const ProblemSpec& spec, const DescentOptions& opts,
                                               const QuadratureRule& rule = QuadratureRule(5),
                                               bool with_accuracy_estimate = true) {
    if (spec.kind != ProblemKind::polyharmonic || spec.m != 2)
        throw UnsupportedOrder("solve_polyharmonic_1d supports m = 2 only");
    const Grid1D& g = spec.grid;
    const int n = g.n;
    const int m = g.num_nodes();
    if (n < 6) throw Error("polyharmonic solver needs n >= 6");
    const double h = g.h();

    ReferenceSolution ref;
    if (spec.p == 2.0) {
        // nodal values of P(x) = (1/6) int_a^x (x-t)^3 h(t) dt by composite
        // quadrature over the cells left of each node
        std::vector<double> P(m, 0.0), P1v(m, 0.0);
        for (int i = 1; i <= n; ++i) {
            const double xi = g.node(i);
            double acc = 0.0, acc1 = 0.0;
            for (int cell = 0; cell < i; ++cell)
                rule.over_interval(g.node(cell), g.node(cell + 1), [&](double t, double w) {
                    const double d = xi - t;
                    const double hv = spec.load().eval(t);
                    acc += w * d * d * d * hv / 6.0;
                    acc1 += w * d * d * hv / 2.0;
                });
            P[i] = acc;
            P1v[i] = acc1;
        }
        const double L = g.length();
        // u(b) = P(b) + alpha L^2 + beta L^3 = 0, u'(b) = P'(b) + 2 alpha L + 3 beta L^2 = 0
        const double det = L * L * 3.0 * L * L - L * L * L * 2.0 * L;  // = L^4
        const double alpha = (-P[n] * 3.0 * L * L + L * L * L * P1v[n]) / det;
        const double beta = (-L * L * P1v[n] + 2.0 * L * P[n]) / det;
        std::vector<double> u(m);
        for (int i = 0; i <= n; ++i) {
            const double t = g.node(i) - g.a;
            u[i] = P[i] + alpha * t * t + beta * t * t * t;
        }
        ref.field = P1Function(g, std::move(u));
        ref.provenance = ReferenceMethod::analytic_shooting;
        ref.converged = true;
    } else {
        const std::vector<double> loadvec = assemble_load(spec.load(), g, rule);

        // D2 stencil: cell i reads the second difference at node max(i,1)
        auto lap_cells = [&](const std::vector<double>& v, std::vector<double>& lap) {
            lap.assign(n, 0.0);
            for (int i = 1; i < n; ++i)
                lap[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            lap[0] = lap[1];
        };

        DescentProblem prob;
        prob.value = [&](const std::vector<double>& v) {
            std::vector<double> lap;
            lap_cells(v, lap);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += h * std::pow(std::abs(lap[i]), spec.p);
            double load_term = 0.0;
            for (int j = 0; j < m; ++j) load_term += loadvec[j] * v[j];
            return acc / spec.p - load_term;
        };
        prob.gradient = [&](const std::vector<double>& v, std::vector<double>& grad) {
            std::vector<double> lap;
            lap_cells(v, lap);
            grad.assign(m, 0.0);
            for (int cell = 0; cell < n; ++cell) {
                const int node = std::max(cell, 1);
                const double t = h * signed_power(lap[cell], spec.p) / (h * h);
                grad[node - 1] += t;
                grad[node] -= 2.0 * t;
                grad[node + 1] += t;
            }
            for (int j = 0; j < m; ++j) grad[j] -= loadvec[j];
            grad[0] = grad[1] = grad[n - 1] = grad[n] = 0.0;
        };
        prob.project = [&](std::vector<double>& v) { v[0] = v[1] = v[n - 1] = v[n] = 0.0; };

        // clamped discrete biharmonic (p = 2 Hessian) as preconditioner
        const int dof = n - 3;  // nodes 2 .. n-2
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dof, dof);
        {
            auto add = [&](int ni, int nj, double val) {
                if (ni >= 2 && ni <= n - 2 && nj >= 2 && nj <= n - 2) B(ni - 2, nj - 2) += val;
            };
            for (int cell = 0; cell < n; ++cell) {
                const int node = std::max(cell, 1);
                const int idx[3] = {node - 1, node, node + 1};
                const double stn[3] = {1.0, -2.0, 1.0};
                for (int aI = 0; aI < 3; ++aI)
                    for (int bI = 0; bI < 3; ++bI)
                        add(idx[aI], idx[bI], h * stn[aI] * stn[bI] / (h * h * h * h));
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        prob.precondition = [&, dof](const std::vector<double>& grad, std::vector<double>& dir) {
            Eigen::VectorXd r(dof);
            for (int i = 0; i < dof; ++i) r(i) = -grad[i + 2];
            Eigen::VectorXd dsol = llt.solve(r);
            dir.assign(m, 0.0);
            for (int i = 0; i < dof; ++i) dir[i + 2] = dsol(i);
        };

        std::vector<double> v0(m, 0.0);
        auto res = descent_minimize(std::move(v0), prob, opts);
        ref.field = P1Function(g, std::move(res.x));
        ref.provenance = ReferenceMethod::fine_grid_descent;
        ref.converged = res.converged;
        ref.iters = res.iters;
    }

    if (with_accuracy_estimate) {
        const Grid1D fine(g.a, g.b, 2 * n);
        const ReferenceSolution fref =
            solve_polyharmonic_1d(spec.with_grid(fine), opts, rule, false);
        // accuracy in the second-difference measure; the coarse D2 field is
        // prolonged cellwise (P1 nodal prolongation would inject kink spikes)
        const P0Function lap_f = discrete_laplacian(fref.field);
        const P0Function lap_c = discrete_laplacian(ref.field);
        double acc = 0.0;
        for (int i = 0; i < fine.n; ++i)
            acc += fine.h() * std::pow(std::abs(lap_f.values[i] - lap_c.values[i / 2]), spec.p);
        ref.est_accuracy = 2.0 * std::pow(acc, 1.0 / spec.p);
    }
    return ref;
}

/// Fractional Galerkin reference over interior P1 hats with zero exterior
/// extension. p = 2 reduces to one dense solve of the assembled nonlocal
/// stiffness; p != 2 runs preconditioned descent with the p = 2 stiffness
/// as the smoother. The PairQuadrature must live on spec.grid.
inline ReferenceSolution solve_fractional_galerkin(const ProblemSpec& spec,
                                                   const PairQuadrature& pq,
                                                   const DescentOptions& opts,
                                                   const QuadratureRule& rule = QuadratureRule(5),
                                                   bool with_accuracy_estimate = true) {
    if (spec.kind != ProblemKind::fractional) throw ShapeMismatch("solve_fractional_galerkin");
    const Grid1D& g = spec.grid;
    check_same_grid(g, pq.grid, "solve_fractional_galerkin");
    const int m = g.num_nodes();
    const double p = spec.p;
    const double s = spec.s;

    const std::vector<double> loadvec = assemble_load(spec.load(), g, rule);

    const std::vector<double> K = fractional_stiffness_p2(s, pq);
    const int dof = m - 2;
    Eigen::MatrixXd Ki(dof, dof);
    for (int i = 0; i < dof; ++i)
        for (int j = 0; j < dof; ++j)
            Ki(i, j) = K[static_cast<std::size_t>(i + 1) * m + (j + 1)];
    Eigen::LLT<Eigen::MatrixXd> llt(Ki);

    ReferenceSolution ref;
    ref.provenance = ReferenceMethod::fine_grid_descent;

    if (p == 2.0) {
        Eigen::VectorXd rhs(dof);
        for (int i = 0; i < dof; ++i) rhs(i) = loadvec[i + 1];
        Eigen::VectorXd sol = llt.solve(rhs);
        std::vector<double> u(m, 0.0);
        for (int i = 0; i < dof; ++i) u[i + 1] = sol(i);
        ref.field = P1Function(g, std::move(u));
        ref.converged = true;
        ref.iters = 1;
    } else {
        DescentProblem prob;
        prob.value = [&](const std::vector<double>& v) {
            const P1Function f(g, v);
            double load_term = 0.0;
            for (int j = 0; j < m; ++j) load_term += loadvec[j] * v[j];
            return gagliardo_seminorm_pow(s, p, f, pq) / p - load_term;
        };
        prob.gradient = [&](const std::vector<double>& v, std::vector<double>& grad) {
            const P1Function f(g, v);
            fractional_seminorm_gradient(s, p, f, pq, grad);
            for (int j = 0; j < m; ++j) grad[j] -= loadvec[j];
            grad.front() = grad.back() = 0.0;
        };
        prob.project = [&](std::vector<double>& v) { v.front() = v.back() = 0.0; };
        prob.precondition = [&](const std::vector<double>& grad, std::vector<double>& dir) {
            Eigen::VectorXd r(dof);
            for (int i = 0; i < dof; ++i) r(i) = -grad[i + 1];
            Eigen::VectorXd dsol = llt.solve(r);
            dir.assign(m, 0.0);
            for (int i = 0; i < dof; ++i) dir[i + 1] = dsol(i);
        };

        std::vector<double> v0(m, 0.0);
        auto res = descent_minimize(std::move(v0), prob, opts);
        ref.field = P1Function(g, std::move(res.x));
        ref.converged = res.converged;
        ref.iters = res.iters;
    }

    if (with_accuracy_estimate && g.n >= 8) {
        // coarse-side estimate (building a finer PairQuadrature would be
        // disproportionately expensive): the seminorm distance between the
        // half-resolution solution and this one
        const Grid1D coarse(g.a, g.b, g.n / 2);
        const PairQuadrature cpq(coarse, pq.order, pq.depth, pq.ratio);
        const ReferenceSolution cref =
            solve_fractional_galerkin(spec.with_grid(coarse), cpq, opts, rule, false);
        std::vector<double> con(m);
        for (int i = 0; i <= g.n; ++i) con[i] = cref.field(g.node(i));
        P1Function diff(g, std::move(con));
        for (int i = 0; i <= g.n; ++i) diff.values[i] -= ref.field.values[i];
        ref.est_accuracy = std::pow(gagliardo_seminorm_pow(s, p, diff, pq), 1.0 / p);
    }
    return ref;
}

/// Restrict u_ref to coarse_n nodes and re-interpolate onto the fine grid;
/// obstacle kinds re-project onto {v >= phi}, Neumann re-centers the mean.
inline P1Function make_crude_approx(const P1Function& u_ref, int coarse_n,
                                    const ProblemSpec* spec = nullptr) {
    const Grid1D& g = u_ref.grid;
    if (coarse_n < 1 || g.n % coarse_n != 0)
        throw ShapeMismatch("make_crude_approx: coarse_n must divide the reference grid");
    const int stride = g.n / coarse_n;
    std::vector<double> v(g.num_nodes());
    for (int c = 0; c < coarse_n; ++c) {
        const int i0 = c * stride, i1 = (c + 1) * stride;
        const double y0 = u_ref.values[i0], y1 = u_ref.values[i1];
        for (int i = i0; i <= i1; ++i)
            v[i] = y0 + (y1 - y0) * static_cast<double>(i - i0) / stride;
    }
    P1Function out(g, std::move(v));
    if (spec && spec->kind == ProblemKind::obstacle) {
        for (int i = 0; i <= g.n; ++i)
            out.values[i] = std::max(out.values[i], spec->phi->eval(g.node(i)));
    }
    if (spec && spec->kind == ProblemKind::neumann_poisson) out = mean_subtracted(out);
    return out;
}

inline VectorP1 make_crude_approx_vector(const VectorP1& u_ref, int coarse_n) {
    VectorP1 out;
    for (const auto& comp : u_ref) out.push_back(make_crude_approx(comp, coarse_n));
    return out;
}

}  // namespace pmaj
