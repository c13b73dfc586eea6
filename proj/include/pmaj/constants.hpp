#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "pmaj/certified.hpp"
#include "pmaj/descent.hpp"
#include "pmaj/errors.hpp"
#include "pmaj/grid.hpp"
#include "pmaj/nonlocal.hpp"
#include "pmaj/quadrature.hpp"

namespace pmaj {

/// Two-sided closed-form bounds on the first p-Laplace Dirichlet eigenvalue
/// of the N-ball of radius R:
///   N p / R^p <= lambda_1(p; B_R) <= (p+1)(p+2)...(p+N) / (N! R^p).
inline std::pair<double, double> bd_ball_bounds(double p, int N, double R) {
    if (!(p > 1.0) || N < 1 || !(R > 0.0)) throw Error("bd_ball_bounds: need p>1, N>=1, R>0");
    const double lower = N * p / std::pow(R, p);
    double num = 1.0, fact = 1.0;
    for (int k = 1; k <= N; ++k) {
        num *= (p + k);
        fact *= k;
    }
    const double upper = num / (fact * std::pow(R, p));
    return {lower, upper};
}

inline double ball_volume(int N, double R) {
    // pi^{N/2} R^N / Gamma(N/2 + 1)
    return std::pow(M_PI, N / 2.0) * std::pow(R, N) / std::tgamma(N / 2.0 + 1.0);
}

/// Faber-Krahn lower bound lambda_1(p;Omega) >= |Omega|^{-p/N} |B_R|^{p/N}
/// lambda_1(p;B_R), with the ball eigenvalue replaced by its closed-form
/// lower bound. R cancels analytically; we still maximize over a small grid
/// of radii (or use the caller's R when given).
inline double faber_krahn_lower(double p, int N, double domain_measure, double R = 0.0) {
    if (!(domain_measure > 0.0)) throw Error("faber_krahn_lower: measure must be > 0");
    auto value_at = [&](double r) {
        return std::pow(domain_measure, -p / N) * std::pow(ball_volume(N, r), p / N) *
               bd_ball_bounds(p, N, r).first;
    };
    if (R > 0.0) return value_at(R);
    double best = 0.0;
    for (double r : {0.25, 0.5, 1.0, 2.0}) best = std::max(best, value_at(r));
    return best;
}

/// pi_p = 2 pi / (p sin(pi/p)).
inline double pi_p(double p) { return 2.0 * M_PI / (p * std::sin(M_PI / p)); }

/// First Dirichlet eigenvalue of the 1D p-Laplacian on an interval of length
/// L: lambda_1 = (p-1) (pi_p / L)^p. Validated in the test suite against the
/// ball-bound sandwich and against discrete Rayleigh minimization.
inline CertifiedBound lambda1_exact_1d(double p, double L) {
    if (!(p > 1.0) || !(L > 0.0)) throw Error("lambda1_exact_1d: need p>1, L>0");
    const double lam = (p - 1.0) * std::pow(pi_p(p) / L, p);
    return CertifiedBound(lam, Provenance::exact, "lambda_1(p; interval of length " +
                                                      std::to_string(L) + ")");
}

/// Upper bound on the Friedrichs constant C_F of an interval. A guaranteed
/// majorant needs an upper bound on C_F, hence a lower bound on lambda_1:
/// rigorous mode uses the Faber-Krahn/ball chain, exact mode the closed-form
/// 1D eigenvalue.
inline CertifiedBound friedrichs_upper(double p, double L, ConstantsMode mode) {
    if (mode == ConstantsMode::exact) {
        return CertifiedBound(std::pow(lambda1_exact_1d(p, L).value, -1.0 / p), Provenance::exact,
                              "C_F exact (1D eigenvalue)");
    }
    return CertifiedBound(std::pow(faber_krahn_lower(p, 1, L), -1.0 / p),
                          Provenance::rigorous_bound, "C_F rigorous (Faber-Krahn + ball bound)");
}

namespace detail {

struct RayleighSetup {
    bool dirichlet = true;   // else zero-mean (Neumann)
    int order = 5;
    int max_iters = 4000;
};

/// min over P1 fields of ||v'||_p^p / ||v||_p^p on the grid, under either
/// zero-boundary or zero-mean constraint. Any feasible field certifies an
/// upper bound, so the returned value is >= the continuous eigenvalue.
inline double rayleigh_min_p_laplacian(double p, const Grid1D& grid, const RayleighSetup& setup) {
    const QuadratureRule rule(setup.order);
    const double h = grid.h();
    const int m = grid.num_nodes();

    auto apply_bc = [&](std::vector<double>& v) {
        if (setup.dirichlet) {
            v.front() = 0.0;
            v.back() = 0.0;
        } else {
            // exact P1 mean via trapezoid
            double mean = 0.0;
            for (int i = 0; i < grid.n; ++i) mean += 0.5 * (v[i] + v[i + 1]) * h;
            mean /= grid.length();
            for (double& x : v) x -= mean;
        }
    };

    auto num = [&](const std::vector<double>& v) {
        double N = 0.0;
        for (int i = 0; i < grid.n; ++i) N += h * std::pow(std::abs((v[i + 1] - v[i]) / h), p);
        return N;
    };
    auto den = [&](const std::vector<double>& v) {
        P1Function f(grid, v);
        double D = 0.0;
        for (int cell = 0; cell < grid.n; ++cell)
            rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double w) {
                D += w * std::pow(std::abs(f.eval_in_cell(cell, x)), p);
            });
        return D;
    };

    DescentProblem prob;
    prob.value = [&](const std::vector<double>& v) { return num(v) / den(v); };
    prob.gradient = [&](const std::vector<double>& v, std::vector<double>& g) {
        g.assign(m, 0.0);
        // d/dv_j of sum h |s_i|^p
        for (int i = 0; i < grid.n; ++i) {
            const double gs = p * signed_power((v[i + 1] - v[i]) / h, p);
            g[i] -= gs;
            g[i + 1] += gs;
        }
        const double N = num(v), D = den(v);
        const double R = N / D;
        // d/dv_j of integral |v|^p
        std::vector<double> gd(m, 0.0);
        P1Function f(grid, v);
        for (int cell = 0; cell < grid.n; ++cell)
            rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double w) {
                const double loc = (x - grid.node(cell)) / h;
                const double c = w * p * signed_power(f.eval_in_cell(cell, x), p);
                gd[cell] += c * (1.0 - loc);
                gd[cell + 1] += c * loc;
            });
        for (int j = 0; j < m; ++j) g[j] = (g[j] - R * gd[j]) / D;
        if (setup.dirichlet) {
            g.front() = 0.0;
            g.back() = 0.0;
        }
    };
    prob.project = [&](std::vector<double>& v) {
        apply_bc(v);
        const double nrm = std::pow(den(v), 1.0 / p);
        if (nrm > 0.0)
            for (double& x : v) x /= nrm;
    };

    std::vector<double> v0(m);
    for (int i = 0; i < m; ++i) {
        const double t = (grid.node(i) - grid.a) / grid.length();
        v0[i] = setup.dirichlet ? std::sin(M_PI * t) : std::cos(M_PI * t);
    }

    DescentOptions opts;
    opts.max_iters = setup.max_iters;
    opts.grad_tol = 1e-12;
    auto res = descent_minimize(std::move(v0), prob, opts);
    return res.value;
}

}  // namespace detail

/// Exposed Rayleigh oracles (used by validation tests and heuristic modes).
inline double discrete_rayleigh_dirichlet(double p, const Grid1D& grid, int max_iters = 4000) {
    detail::RayleighSetup s;
    s.dirichlet = true;
    s.max_iters = max_iters;
    return detail::rayleigh_min_p_laplacian(p, grid, s);
}

inline double discrete_rayleigh_zero_mean(double p, const Grid1D& grid, int max_iters = 4000) {
    detail::RayleighSetup s;
    s.dirichlet = false;
    s.max_iters = max_iters;
    return detail::rayleigh_min_p_laplacian(p, grid, s);
}

/// Poincare constant for zero-mean fields on an interval of length L. In 1D
/// the first nonzero Neumann eigenvalue of the p-Laplacian coincides with the
/// Dirichlet one, which the test suite validates by discrete Rayleigh
/// minimization over zero-mean fields.
inline CertifiedBound poincare_constant_1d(double p, double L, ConstantsMode mode) {
    if (mode == ConstantsMode::exact)
        return CertifiedBound(std::pow(lambda1_exact_1d(p, L).value, -1.0 / p), Provenance::exact,
                              "C_P exact (1D Neumann eigenvalue)");
    if (p == 2.0)
        return CertifiedBound(L / M_PI, Provenance::rigorous_bound, "C_P rigorous (p = 2, L/pi)");
    const Grid1D g(0.0, L, 256);
    const double lam = discrete_rayleigh_zero_mean(p, g);
    return CertifiedBound(1.01 * std::pow(lam, -1.0 / p), Provenance::heuristic,
                          "C_P heuristic (1.01 x discrete Rayleigh)");
}

/// Trace constant: ||w||_{p,boundary} <= C_T ||w'||_p for zero-mean w on an
/// interval of length L. From w(0) = -int (1 - s/L) w'(s) ds and Hoelder,
///   C_T = 2^{1/p} L^{1/p'} / (p'+1)^{1/p'}.
inline CertifiedBound trace_constant_1d(double p, double L) {
    const double pc = p / (p - 1.0);
    const double value = std::pow(2.0, 1.0 / p) * std::pow(L, 1.0 / pc) / std::pow(pc + 1.0, 1.0 / pc);
    return CertifiedBound(value, Provenance::rigorous_bound, "C_T (Hoelder bound)");
}

/// First root of cosh(b) cos(b) = 1 above pi (clamped-beam eigenvalue root).
inline double clamped_beam_root() {
    double lo = 4.0, hi = 5.0;
    auto f = [](double b) { return std::cos(b) * std::cosh(b) - 1.0; };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Embedding constant C_{F,m} of W_0^{m,p} into L^p, m = 2 only.
/// Rigorous mode chains Friedrichs twice (a clamped 1D field and its
/// derivative both vanish at the endpoints), giving C_{F,2} <= C_F^2.
/// Exact mode (p = 2) uses the clamped-beam eigenvalue (L/beta)^2 with
/// cosh(beta) cos(beta) = 1.
inline CertifiedBound embedding_constant_polyharm(int m, double p, double L, ConstantsMode mode) {
    if (m != 2) throw UnsupportedOrder("embedding_constant_polyharm supports m = 2 only");
    if (mode == ConstantsMode::exact && p == 2.0) {
        const double beta = clamped_beam_root();
        return CertifiedBound(std::pow(L / beta, 2.0), Provenance::exact,
                              "C_{F,2} exact (clamped beam eigenvalue)");
    }
    const CertifiedBound cf = friedrichs_upper(p, L, mode);
    return CertifiedBound(cf.value * cf.value, Provenance::rigorous_bound,
                          "C_{F,2} rigorous (C_F^2 chain)");
}

/// Heuristic fractional embedding constant C_{F,s}: 1.05 x the discrete
/// Rayleigh estimate over P1 fields on fine_n cells. Always heuristic (no
/// constructive fractional Faber-Krahn constant is printed in the sources we
/// bound against); it taints downstream certification by design.
inline CertifiedBound embedding_constant_fractional(double s, double p, const Grid1D& domain,
                                                    int fine_n, int max_iters = 600) {
    if (!(s > 0.0 && s < 1.0)) throw Error("embedding_constant_fractional: need 0 < s < 1");
    const Grid1D g(domain.a, domain.b, fine_n);
    const PairQuadrature pq(g, 4, 6, 0.5);
    const QuadratureRule rule(4);
    const int m = g.num_nodes();
    const double h = g.h();

    auto den_pow = [&](const std::vector<double>& v) {
        P1Function f(g, v);
        double D = 0.0;
        for (int cell = 0; cell < g.n; ++cell)
            rule.over_interval(g.node(cell), g.node(cell + 1), [&](double x, double w) {
                D += w * std::pow(std::abs(f.eval_in_cell(cell, x)), p);
            });
        return D;
    };

    DescentProblem prob;
    prob.value = [&](const std::vector<double>& v) {
        P1Function f(g, v);
        return gagliardo_seminorm_pow(s, p, f, pq) / den_pow(v);
    };
    prob.gradient = [&](const std::vector<double>& v, std::vector<double>& grad) {
        P1Function f(g, v);
        std::vector<double> gn;
        fractional_seminorm_gradient(s, p, f, pq, gn);  // gradient of (1/p)[v]^p
        for (double& x : gn) x *= p;
        const double N = gagliardo_seminorm_pow(s, p, f, pq);
        const double D = den_pow(v);
        const double R = N / D;
        std::vector<double> gd(m, 0.0);
        for (int cell = 0; cell < g.n; ++cell)
            rule.over_interval(g.node(cell), g.node(cell + 1), [&](double x, double w) {
                const double loc = (x - g.node(cell)) / h;
                const double c = w * p * signed_power(f.eval_in_cell(cell, x), p);
                gd[cell] += c * (1.0 - loc);
                gd[cell + 1] += c * loc;
            });
        grad.assign(m, 0.0);
        for (int j = 1; j + 1 < m; ++j) grad[j] = (gn[j] - R * gd[j]) / D;
    };
    prob.project = [&](std::vector<double>& v) {
        v.front() = 0.0;
        v.back() = 0.0;
        const double nrm = std::pow(den_pow(v), 1.0 / p);
        if (nrm > 0.0)
            for (double& x : v) x /= nrm;
    };

    std::vector<double> v0(m);
    for (int i = 0; i < m; ++i)
        v0[i] = std::sin(M_PI * (g.node(i) - g.a) / g.length());
    DescentOptions opts;
    opts.max_iters = max_iters;
    opts.grad_tol = 1e-10;
    auto res = descent_minimize(std::move(v0), prob, opts);
    const double lam = res.value;
    return CertifiedBound(1.05 * std::pow(lam, -1.0 / p), Provenance::heuristic,
                          "C_{F,s} heuristic (1.05 x discrete Rayleigh)");
}

/// Discrete Rayleigh quotient minimum of the clamped 1D biharmonic operator
/// (validation oracle for the exact C_{F,2}).
inline double discrete_rayleigh_clamped_biharmonic(const Grid1D& grid, int max_iters = 6000) {
    const int m = grid.num_nodes();
    const int n = grid.n;
    const double h = grid.h();
    if (n < 6) throw Error("clamped biharmonic Rayleigh needs n >= 6");
    const QuadratureRule rule(5);

    auto second_diffs = [&](const std::vector<double>& v, std::vector<double>& w) {
        w.assign(m, 0.0);
        for (int i = 1; i < n; ++i) w[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
    };
    auto num = [&](const std::vector<double>& v) {
        std::vector<double> w;
        second_diffs(v, w);
        double N = 0.0;
        for (int i = 1; i < n; ++i) N += h * w[i] * w[i];
        return N;
    };
    auto den = [&](const std::vector<double>& v) {
        P1Function f(grid, v);
        double D = 0.0;
        for (int cell = 0; cell < n; ++cell)
            rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double w) {
                const double fv = f.eval_in_cell(cell, x);
                D += w * fv * fv;
            });
        return D;
    };
    auto clamp_bc = [&](std::vector<double>& v) {
        v[0] = v[1] = 0.0;
        v[n] = v[n - 1] = 0.0;
    };

    DescentProblem prob;
    prob.value = [&](const std::vector<double>& v) { return num(v) / den(v); };
    prob.gradient = [&](const std::vector<double>& v, std::vector<double>& g) {
        std::vector<double> w;
        second_diffs(v, w);
        g.assign(m, 0.0);
        for (int i = 1; i < n; ++i) {
            const double c = 2.0 * h * w[i] / (h * h);
            g[i - 1] += c;
            g[i] -= 2.0 * c;
            g[i + 1] += c;
        }
        const double N = num(v), D = den(v), R = N / D;
        std::vector<double> gd(m, 0.0);
        P1Function f(grid, v);
        for (int cell = 0; cell < n; ++cell)
            rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double wq) {
                const double loc = (x - grid.node(cell)) / h;
                const double c = 2.0 * wq * f.eval_in_cell(cell, x);
                gd[cell] += c * (1.0 - loc);
                gd[cell + 1] += c * loc;
            });
        for (int j = 0; j < m; ++j) g[j] = (g[j] - R * gd[j]) / D;
        g[0] = g[1] = g[n] = g[n - 1] = 0.0;
    };
    prob.project = [&](std::vector<double>& v) {
        clamp_bc(v);
        const double nrm = std::sqrt(den(v));
        if (nrm > 0.0)
            for (double& x : v) x /= nrm;
    };

    std::vector<double> v0(m);
    for (int i = 0; i <= n; ++i) {
        const double t = (grid.node(i) - grid.a) / grid.length();
        v0[i] = t * t * (1.0 - t) * (1.0 - t);
    }
    DescentOptions opts;
    opts.max_iters = max_iters;
    opts.grad_tol = 1e-12;
    return descent_minimize(std::move(v0), prob, opts).value;
}

}  // namespace pmaj
