#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "pmaj/errors.hpp"
#include "pmaj/grid.hpp"

namespace pmaj {

/// Gauss-Legendre points/weights on the reference interval [0,1].
struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;  // sum to 1

    explicit GaussRule(int order) {
        if (order < 1 || order > 64) throw Error("Gauss order out of range [1,64]");
        points.resize(order);
        weights.resize(order);
        // Newton iteration on P_q over [-1,1], then map to [0,1].
        for (int i = 0; i < order; ++i) {
            long double x = std::cos(M_PI * (i + 0.75L) / (order + 0.5L));
            long double p1 = 0, dp = 0;
            for (int it = 0; it < 100; ++it) {
                p1 = 1.0L;
                long double p2 = 0.0L;
                for (int j = 0; j < order; ++j) {
                    const long double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0L * j + 1.0L) * x * p2 - j * p3) / (j + 1);
                }
                dp = order * (x * p1 - p2) / (x * x - 1.0L);
                const long double dx = p1 / dp;
                x -= dx;
                if (std::abs(static_cast<double>(dx)) < 1e-17) break;
            }
            points[i] = static_cast<double>(0.5L * (1.0L - x));
            weights[i] = static_cast<double>(1.0L / ((1.0L - x * x) * dp * dp));
        }
    }
};

struct Grading {
    double mark = 0.0;  // grade geometrically toward this point
    double ratio = 0.5;
    int depth = 8;
};

/// Composite Gauss-Legendre rule applied per cell, with optional geometric
/// grading toward a marked point. Weights over a cell sum to the cell length.
class QuadratureRule {
public:
    explicit QuadratureRule(int order = 5, std::optional<Grading> grading = std::nullopt)
        : order_(order), gauss_(order), grading_(grading) {}

    int order() const { return order_; }
    const GaussRule& gauss() const { return gauss_; }
    const std::optional<Grading>& grading() const { return grading_; }

    /// Apply fn(x, w) over [alpha, beta]; splits geometrically toward the
    /// grading mark when it touches or lies inside the interval.
    template <class Fn>
    void over_interval(double alpha, double beta, Fn&& fn) const {
        if (!(alpha < beta)) return;
        if (grading_) {
            const double m = grading_->mark;
            if (alpha < m && m < beta) {
                graded_toward(m, alpha, /*toward_right=*/true, fn);
                graded_toward(m, beta, /*toward_right=*/false, fn);
                return;
            }
            if (m == alpha) {
                graded_toward(alpha, beta, /*toward_right=*/false, fn);
                return;
            }
            if (m == beta) {
                graded_toward(beta, alpha, /*toward_right=*/true, fn);
                return;
            }
        }
        plain(alpha, beta, fn);
    }

    /// Same as over_interval with grading toward an explicit point (ignores
    /// the rule's own mark). Used by singular-kernel integrals.
    template <class Fn>
    void over_interval_graded_to(double singular_point, double alpha, double beta, Fn&& fn) const {
        if (!(alpha < beta)) return;
        if (singular_point <= alpha) graded_toward(alpha, beta, false, fn);
        else if (singular_point >= beta) graded_toward(beta, alpha, true, fn);
        else {
            graded_toward(singular_point, alpha, true, fn);
            graded_toward(singular_point, beta, false, fn);
        }
    }

private:
    int order_;
    GaussRule gauss_;
    std::optional<Grading> grading_;

    template <class Fn>
    void plain(double alpha, double beta, Fn&& fn) const {
        const double len = beta - alpha;
        for (int k = 0; k < order_; ++k)
            fn(alpha + gauss_.points[k] * len, gauss_.weights[k] * len);
    }

    // Geometric segments from `far` toward the singular point `sing`.
    // toward_right=true means sing < far is integrated as (sing, far].
    template <class Fn>
    void graded_toward(double sing, double far, bool toward_right, Fn&& fn) const {
        const double ratio = grading_ ? grading_->ratio : 0.5;
        const int depth = grading_ ? grading_->depth : 8;
        double span = std::abs(far - sing);
        if (span == 0.0) return;
        const double dir = toward_right ? 1.0 : -1.0;
        double outer = span;
        for (int k = 0; k < depth; ++k) {
            const double inner = outer * ratio;
            const double lo = sing + dir * std::min(inner, outer);
            const double hi = sing + dir * std::max(inner, outer);
            plain(std::min(lo, hi), std::max(lo, hi), fn);
            outer = inner;
        }
        // innermost segment down to the singular point
        const double lo = std::min(sing, sing + dir * outer);
        const double hi = std::max(sing, sing + dir * outer);
        plain(lo, hi, fn);
    }
};

/// Marker subset of cells; null means all cells.
using CellMask = std::vector<unsigned char>;

namespace detail {

template <class Field>
struct CellEvaluator {
    const Field& f;
    double operator()(int cell, double x) const { return f(cell, x); }
};

inline double eval_field(const P0Function& f, int cell, double /*x*/) { return f.values[cell]; }
inline double eval_field(const P1Function& f, int cell, double x) { return f.eval_in_cell(cell, x); }
inline double eval_field(const CoeffFn& f, int /*cell*/, double x) { return f.eval(x); }

template <class F>
inline auto eval_field(const F& f, int cell, double x) -> decltype(f(cell, x)) {
    return f(cell, x);
}

}  // namespace detail

/// Integral of fn over the masked cells of the grid.
template <class Field>
double integrate(const Field& f, const Grid1D& grid, const QuadratureRule& rule,
                 const CellMask* mask = nullptr) {
    double total = 0.0;
    for (int cell = 0; cell < grid.n; ++cell) {
        if (mask && !(*mask)[cell]) continue;
        double acc = 0.0;
        rule.over_interval(grid.node(cell), grid.node(cell + 1),
                           [&](double x, double w) { acc += w * detail::eval_field(f, cell, x); });
        total += acc;
    }
    return total;
}

/// L^q norm (integral of |f|^q, then the q-th root) over masked cells.
template <class Field>
double lq_norm(const Field& f, double q, const Grid1D& grid, const QuadratureRule& rule,
               const CellMask* mask = nullptr) {
    if (!(q > 1.0)) throw Error("lq_norm requires q > 1");
    double total = 0.0;
    for (int cell = 0; cell < grid.n; ++cell) {
        if (mask && !(*mask)[cell]) continue;
        rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double w) {
            total += w * std::pow(std::abs(detail::eval_field(f, cell, x)), q);
        });
    }
    return std::pow(total, 1.0 / q);
}

/// Integral of f*g over masked cells.
template <class F, class G>
double inner_product(const F& f, const G& g, const Grid1D& grid, const QuadratureRule& rule,
                     const CellMask* mask = nullptr) {
    double total = 0.0;
    for (int cell = 0; cell < grid.n; ++cell) {
        if (mask && !(*mask)[cell]) continue;
        rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double w) {
            total += w * detail::eval_field(f, cell, x) * detail::eval_field(g, cell, x);
        });
    }
    return total;
}

/// Cumulative integral H with H(a) = 0, H(x_i) = int_a^{x_i} f.
template <class Field>
P1Function antiderivative(const Field& f, const Grid1D& grid, const QuadratureRule& rule) {
    std::vector<double> values(grid.num_nodes(), 0.0);
    for (int cell = 0; cell < grid.n; ++cell) {
        double acc = 0.0;
        rule.over_interval(grid.node(cell), grid.node(cell + 1),
                           [&](double x, double w) { acc += w * detail::eval_field(f, cell, x); });
        values[cell + 1] = values[cell] + acc;
    }
    return P1Function(grid, std::move(values));
}

}  // namespace pmaj
