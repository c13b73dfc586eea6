#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "pmaj/errors.hpp"
#include "pmaj/grid.hpp"
#include "pmaj/quadrature.hpp"
#include "pmaj/rng.hpp"

namespace pmaj {

inline double signed_power(double t, double p) {
    // |t|^{p-2} t, with the p<2 value 0 at t=0.
    if (t == 0.0) return 0.0;
    return std::pow(std::abs(t), p - 2.0) * t;
}

/// Exact integral of |x-y|^{-1-e} over y outside (a,b), for x inside: the
/// two one-sided tails ((b-x)^{-e} + (x-a)^{-e}) / e.
inline double exterior_tail(const Grid1D& grid, double x, double e) {
    return (std::pow(grid.b - x, -e) + std::pow(x - grid.a, -e)) / e;
}

/// Quadrature decomposition of the symmetric double integral over
/// Omega x Omega: integral = 2 * sum over the stored (x, y=x+t, w) points of
/// f(x,y)*w, valid for integrands with f(x,y) = f(y,x). The t-direction is cut
/// at multiples of h and graded geometrically toward the diagonal t=0; each
/// x-line is cut at mesh nodes and their t-shifts so P1 data is smooth on
/// every piece. Boundary-layer x-points (for exterior tails) are graded
/// toward the endpoints.
class PairQuadrature {
public:
    struct InteriorPoint {
        double x, y, w, t;  // y = x + t, t > 0
        int cx, cy;         // cells containing x and y
        double lx, ly;      // local coordinates in [0,1]
    };
    struct XPoint {
        double x, w;
        int cell;
        double loc;
    };

    Grid1D grid;
    int order;
    int depth;
    double ratio;
    std::vector<InteriorPoint> interior;
    std::vector<XPoint> boundary_x;  // for exterior-tail integrals over Omega

    explicit PairQuadrature(const Grid1D& g, int gauss_order = 5, int grading_depth = 8,
                            double grading_ratio = 0.5)
        : grid(g), order(gauss_order), depth(grading_depth), ratio(grading_ratio) {
        build();
    }

private:
    void locate(double x, int& cell, double& loc) const {
        const double t = (x - grid.a) / grid.h();
        cell = std::min(std::max(static_cast<int>(std::floor(t)), 0), grid.n - 1);
        loc = t - cell;
    }

    void build() {
        const GaussRule gauss(order);
        const double h = grid.h();
        const double T = grid.length();

        // t-segments: graded split of (0,h], then the uniform cells (kh,(k+1)h].
        std::vector<std::pair<double, double>> tsegs;
        double outer = h;
        for (int k = 0; k < depth; ++k) {
            const double inner = outer * ratio;
            tsegs.push_back({inner, outer});
            outer = inner;
        }
        tsegs.push_back({0.0, outer});
        for (int k = 1; k < grid.n; ++k) tsegs.push_back({k * h, (k + 1) * h});

        std::vector<double> cuts;
        for (const auto& [t0, t1] : tsegs) {
            const double tlen = t1 - t0;
            for (int kt = 0; kt < order; ++kt) {
                const double t = t0 + gauss.points[kt] * tlen;
                const double wt = gauss.weights[kt] * tlen;
                if (t <= 0.0 || t >= T) continue;
                // x in (a, b - t), cut at nodes x_j and shifted nodes x_j - t.
                cuts.clear();
                cuts.push_back(grid.a);
                const double xmax = grid.b - t;
                for (int j = 1; j <= grid.n; ++j) {
                    const double xj = grid.node(j);
                    if (xj < xmax) cuts.push_back(xj);
                    const double xs = xj - t;
                    if (xs > grid.a && xs < xmax) cuts.push_back(xs);
                }
                cuts.push_back(xmax);
                std::sort(cuts.begin(), cuts.end());
                for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                    const double x0 = cuts[c], x1 = cuts[c + 1];
                    if (x1 - x0 < 1e-15 * T) continue;
                    for (int kx = 0; kx < order; ++kx) {
                        InteriorPoint pt;
                        pt.x = x0 + gauss.points[kx] * (x1 - x0);
                        pt.y = pt.x + t;
                        pt.t = t;
                        pt.w = wt * gauss.weights[kx] * (x1 - x0);
                        locate(pt.x, pt.cx, pt.lx);
                        locate(pt.y, pt.cy, pt.ly);
                        interior.push_back(pt);
                    }
                }
            }
        }

        // x-quadrature for exterior tails: grade the boundary cells toward the
        // endpoints (the tail weight has a fractional singularity there).
        QuadratureRule rule(order);
        auto add_x = [&](double x, double w) {
            XPoint p;
            p.x = x;
            p.w = w;
            locate(x, p.cell, p.loc);
            boundary_x.push_back(p);
        };
        for (int cell = 0; cell < grid.n; ++cell) {
            const double x0 = grid.node(cell), x1 = grid.node(cell + 1);
            if (cell == 0 && cell == grid.n - 1) {
                rule.over_interval_graded_to(grid.a, x0, grid.midpoint(cell), add_x);
                rule.over_interval_graded_to(grid.b, grid.midpoint(cell), x1, add_x);
            } else if (cell == 0) {
                rule.over_interval_graded_to(grid.a, x0, x1, add_x);
            } else if (cell == grid.n - 1) {
                rule.over_interval_graded_to(grid.b, x0, x1, add_x);
            } else {
                rule.over_interval(x0, x1, add_x);
            }
        }
    }
};

inline double p1_value(const P1Function& v, int cell, double loc) {
    return v.values[cell] * (1.0 - loc) + v.values[cell + 1] * loc;
}

/// Gagliardo seminorm to the p-th power, [v]_p^p. The field is extended by
/// zero outside the grid, so it must vanish at both endpoints for the
/// exterior part to be finite.
inline double gagliardo_seminorm_pow(double s, double p, const P1Function& v,
                                     const PairQuadrature& pq) {
    if (s * p == 0.0) throw Error("gagliardo seminorm needs p*s != 0");
    double interior = 0.0;
    for (const auto& pt : pq.interior) {
        const double V = p1_value(v, pt.cx, pt.lx) - p1_value(v, pt.cy, pt.ly);
        if (V == 0.0) continue;
        interior += pt.w * std::pow(std::abs(V), p) * std::pow(pt.t, -1.0 - p * s);
    }
    double mixed = 0.0;
    for (const auto& pt : pq.boundary_x) {
        const double vv = p1_value(v, pt.cell, pt.loc);
        if (vv == 0.0) continue;
        mixed += pt.w * std::pow(std::abs(vv), p) * exterior_tail(pq.grid, pt.x, p * s);
    }
    return 2.0 * interior + 2.0 * mixed;
}

inline double gagliardo_seminorm(double s, double p, const P1Function& v,
                                 const PairQuadrature& pq) {
    return std::pow(gagliardo_seminorm_pow(s, p, v, pq), 1.0 / p);
}

/// Kernel field gamma(x,y) on R^2. Exterior structure: for x inside Omega and
/// y outside, gamma(x,y) = ext_coeff(x) * |x-y|^{-ext_decay} (the form every
/// kernel assembled from a zero-extended P1 field takes); user kernels are
/// taken as supported on Omega x Omega (ext_zero).
struct KernelField {
    std::function<double(double, double)> eval;
    std::function<double(double)> ext_coeff;
    double ext_decay = 0.0;
    bool ext_zero = false;
    bool skew_symmetric = true;

    // Set for kernels of the form |grad_s v|^{p-2} grad_s v with P1 v; used
    // for the integrability guard of the strong operators.
    bool flux_type = false;
    double s = 0.0;
    double p = 2.0;
};

inline double zero_extended(const P1Function& v, const Grid1D& g, double x) {
    if (x <= g.a || x >= g.b) return 0.0;
    return v(x);
}

/// Nonlocal gradient kernel (w(x)-w(y))/|x-y|^s of a P1 field, zero-extended.
inline KernelField nonlocal_gradient(double s, const P1Function& v) {
    auto vp = std::make_shared<P1Function>(v);
    const Grid1D g = v.grid;
    KernelField k;
    k.eval = [vp, g, s](double x, double y) {
        if (x == y) return 0.0;
        const double V = zero_extended(*vp, g, x) - zero_extended(*vp, g, y);
        return V / std::pow(std::abs(x - y), s);
    };
    k.ext_coeff = [vp, g](double x) { return zero_extended(*vp, g, x); };
    k.ext_decay = s;
    k.skew_symmetric = true;
    k.s = s;
    return k;
}

/// Flux kernel |grad_s v|^{p-2} grad_s v of a P1 field, zero-extended.
inline KernelField flux_kernel(double s, double p, const P1Function& v) {
    auto vp = std::make_shared<P1Function>(v);
    const Grid1D g = v.grid;
    KernelField k;
    k.eval = [vp, g, s, p](double x, double y) {
        if (x == y) return 0.0;
        const double V = zero_extended(*vp, g, x) - zero_extended(*vp, g, y);
        if (V == 0.0) return 0.0;
        return signed_power(V / std::pow(std::abs(x - y), s), p);
    };
    k.ext_coeff = [vp, g, p](double x) { return signed_power(zero_extended(*vp, g, x), p); };
    k.ext_decay = s * (p - 1.0);
    k.skew_symmetric = true;
    k.flux_type = true;
    k.s = s;
    k.p = p;
    return k;
}

inline KernelField zero_kernel(double ext_decay = 0.0) {
    KernelField k;
    k.eval = [](double, double) { return 0.0; };
    k.ext_coeff = [](double) { return 0.0; };
    k.ext_decay = ext_decay;
    k.ext_zero = true;
    k.skew_symmetric = true;
    return k;
}

inline KernelField kernel_difference(const KernelField& A, const KernelField& B) {
    if (!A.ext_zero && !B.ext_zero && A.ext_decay != B.ext_decay)
        throw Error("kernel difference: incompatible exterior decay exponents");
    KernelField k;
    auto ea = A.eval, eb = B.eval;
    k.eval = [ea, eb](double x, double y) { return ea(x, y) - eb(x, y); };
    auto ca = A.ext_coeff, cb = B.ext_coeff;
    const bool za = A.ext_zero, zb = B.ext_zero;
    k.ext_coeff = [ca, cb, za, zb](double x) {
        return (za ? 0.0 : ca(x)) - (zb ? 0.0 : cb(x));
    };
    k.ext_decay = A.ext_zero ? B.ext_decay : A.ext_decay;
    k.ext_zero = A.ext_zero && B.ext_zero;
    k.skew_symmetric = A.skew_symmetric && B.skew_symmetric;
    return k;
}

/// Spot-check gamma(x,y) = -gamma(y,x) on random pairs.
inline void require_skew_symmetric(const KernelField& k, const Grid1D& g, std::uint64_t seed = 7,
                                   int samples = 1000, double tol = 1e-12) {
    if (!k.skew_symmetric) throw SkewSymmetryViolated("kernel not flagged skew-symmetric");
    SplitMix64 rng(seed);
    for (int i = 0; i < samples; ++i) {
        const double x = rng.uniform(g.a, g.b);
        const double y = rng.uniform(g.a, g.b);
        if (x == y) continue;
        const double f = k.eval(x, y), r = k.eval(y, x);
        const double scale = std::max({std::abs(f), std::abs(r), 1.0});
        if (std::abs(f + r) > tol * scale)
            throw SkewSymmetryViolated("kernel fails gamma(x,y) = -gamma(y,x)");
    }
}

/// P(gamma) = double integral of |gamma|^{p'} / |x-y| over R^2.
inline double p_functional(const KernelField& k, double p, const PairQuadrature& pq) {
    const double pc = p / (p - 1.0);
    double interior = 0.0;
    for (const auto& pt : pq.interior) {
        const double gv = k.eval(pt.x, pt.y);
        if (gv == 0.0) continue;
        interior += pt.w * std::pow(std::abs(gv), pc) / pt.t;
    }
    double mixed = 0.0;
    if (!k.ext_zero) {
        const double e = k.ext_decay * pc;  // |gamma|^{p'} decays as |x-y|^{-e}
        for (const auto& pt : pq.boundary_x) {
            const double c = k.ext_coeff(pt.x);
            if (c == 0.0) continue;
            mixed += pt.w * std::pow(std::abs(c), pc) * exterior_tail(pq.grid, pt.x, e);
        }
    }
    return 2.0 * interior + 2.0 * mixed;
}

namespace detail {

inline void check_strong_operator_regime(double s, double p, const char* what) {
    if (s >= 1.0 - 1.0 / p)
        throw SingularityNotIntegrable(
            std::string(what) +
            ": near-diagonal integrand of a Lipschitz-generated kernel is not absolutely "
            "integrable for s >= 1 - 1/p (s = " +
            std::to_string(s) + ", p = " + std::to_string(p) + ")");
}

/// Integral over y in Omega of f(y), with the cell containing x split and
/// graded toward x; f may blow up (integrably) at y = x.
template <class Fn>
double y_integral_graded(const Grid1D& g, const QuadratureRule& rule, double x, Fn&& f) {
    double acc = 0.0;
    auto absorb = [&](double y, double w) { acc += w * f(y); };
    for (int cell = 0; cell < g.n; ++cell) {
        const double y0 = g.node(cell), y1 = g.node(cell + 1);
        if (x >= y0 - g.h() && x <= y1 + g.h()) {
            // singular or adjacent cell: grade toward x (clamped into the cell)
            rule.over_interval_graded_to(std::min(std::max(x, y0), y1), y0, y1, absorb);
        } else {
            rule.over_interval(y0, y1, absorb);
        }
    }
    return acc;
}

}  // namespace detail

/// (div^(s) gamma)(x) = 2 * integral over R of gamma(x,y) / |x-y|^{1+s} dy.
inline double nonlocal_divergence(double s, const KernelField& k, double x, const Grid1D& g,
                                  int order = 5, int depth = 8, double ratio = 0.5) {
    if (k.flux_type) detail::check_strong_operator_regime(k.s, k.p, "nonlocal_divergence");
    QuadratureRule rule(order, Grading{0.0, ratio, depth});
    const double interior = detail::y_integral_graded(
        g, rule, x, [&](double y) { return k.eval(x, y) / std::pow(std::abs(x - y), 1.0 + s); });
    double ext = 0.0;
    if (!k.ext_zero) ext = k.ext_coeff(x) * exterior_tail(g, x, k.ext_decay + s);
    return 2.0 * (interior + ext);
}

/// L^s_p v(x) = 2 * integral of |v(x)-v(y)|^{p-2}(v(x)-v(y)) / |x-y|^{1+ps} dy.
inline double apply_Lsp(double s, double p, const P1Function& v, double x, int order = 5,
                        int depth = 8, double ratio = 0.5) {
    detail::check_strong_operator_regime(s, p, "apply_Lsp");
    const Grid1D& g = v.grid;
    QuadratureRule rule(order, Grading{0.0, ratio, depth});
    const double vx = zero_extended(v, g, x);
    const double interior = detail::y_integral_graded(g, rule, x, [&](double y) {
        const double V = vx - zero_extended(v, g, y);
        if (V == 0.0) return 0.0;
        return signed_power(V, p) / std::pow(std::abs(x - y), 1.0 + p * s);
    });
    const double ext = signed_power(vx, p) * exterior_tail(g, x, p * s);
    return 2.0 * (interior + ext);
}

/// Galerkin pairing <(1/p) D[v]_p^p, xi> for P1 fields v, xi on one grid.
inline double fractional_pairing(double s, double p, const P1Function& v, const P1Function& xi,
                                 const PairQuadrature& pq) {
    check_same_grid(v.grid, xi.grid, "fractional_pairing");
    double interior = 0.0;
    for (const auto& pt : pq.interior) {
        const double V = p1_value(v, pt.cx, pt.lx) - p1_value(v, pt.cy, pt.ly);
        if (V == 0.0) continue;
        const double X = p1_value(xi, pt.cx, pt.lx) - p1_value(xi, pt.cy, pt.ly);
        interior += pt.w * signed_power(V, p) * X * std::pow(pt.t, -1.0 - p * s);
    }
    double mixed = 0.0;
    for (const auto& pt : pq.boundary_x) {
        const double vv = p1_value(v, pt.cell, pt.loc);
        if (vv == 0.0) continue;
        mixed += pt.w * signed_power(vv, p) * p1_value(xi, pt.cell, pt.loc) *
                 exterior_tail(pq.grid, pt.x, p * s);
    }
    return 2.0 * interior + 2.0 * mixed;
}

/// Full gradient of v -> (1/p)[v]_p^p with respect to the nodal values.
inline void fractional_seminorm_gradient(double s, double p, const P1Function& v,
                                         const PairQuadrature& pq, std::vector<double>& grad) {
    grad.assign(v.values.size(), 0.0);
    for (const auto& pt : pq.interior) {
        const double V = p1_value(v, pt.cx, pt.lx) - p1_value(v, pt.cy, pt.ly);
        if (V == 0.0) continue;
        const double c = 2.0 * pt.w * signed_power(V, p) * std::pow(pt.t, -1.0 - p * s);
        grad[pt.cx] += c * (1.0 - pt.lx);
        grad[pt.cx + 1] += c * pt.lx;
        grad[pt.cy] -= c * (1.0 - pt.ly);
        grad[pt.cy + 1] -= c * pt.ly;
    }
    for (const auto& pt : pq.boundary_x) {
        const double vv = p1_value(v, pt.cell, pt.loc);
        if (vv == 0.0) continue;
        const double c = 2.0 * pt.w * signed_power(vv, p) * exterior_tail(pq.grid, pt.x, p * s);
        grad[pt.cell] += c * (1.0 - pt.loc);
        grad[pt.cell + 1] += c * pt.loc;
    }
}

/// Dense fractional stiffness for p = 2 (row-major (n+1)^2), the exact
/// Hessian of (1/2)[v]_2^2 under this quadrature. Also used as a
/// preconditioner for p != 2.
inline std::vector<double> fractional_stiffness_p2(double s, const PairQuadrature& pq) {
    const int m = pq.grid.n + 1;
    std::vector<double> K(static_cast<std::size_t>(m) * m, 0.0);
    auto add = [&](int i, int j, double val) { K[static_cast<std::size_t>(i) * m + j] += val; };
    for (const auto& pt : pq.interior) {
        const double c = 2.0 * pt.w * std::pow(pt.t, -1.0 - 2.0 * s);
        const int idx[4] = {pt.cx, pt.cx + 1, pt.cy, pt.cy + 1};
        const double val[4] = {1.0 - pt.lx, pt.lx, -(1.0 - pt.ly), -pt.ly};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) add(idx[a], idx[b], c * val[a] * val[b]);
    }
    for (const auto& pt : pq.boundary_x) {
        const double c = 2.0 * pt.w * exterior_tail(pq.grid, pt.x, 2.0 * s);
        const int idx[2] = {pt.cell, pt.cell + 1};
        const double val[2] = {1.0 - pt.loc, pt.loc};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) add(idx[a], idx[b], c * val[a] * val[b]);
    }
    return K;
}

}  // namespace pmaj
