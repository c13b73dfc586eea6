#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "pmaj/errors.hpp"
#include "pmaj/expr.hpp"

namespace pmaj {

/// Uniform 1D mesh of n cells on (a, b); nodes x_i = a + i*(b-a)/n.
struct Grid1D {
    double a = 0.0;
    double b = 1.0;
    int n = 1;

    Grid1D() = default;
    Grid1D(double left, double right, int cells) : a(left), b(right), n(cells) {
        if (!(a < b)) throw Error("Grid1D requires a < b");
        if (n < 1) throw Error("Grid1D requires n >= 1");
    }

    double length() const { return b - a; }
    double h() const { return (b - a) / n; }
    double node(int i) const { return a + i * (b - a) / n; }
    double midpoint(int cell) const { return a + (cell + 0.5) * (b - a) / n; }
    int num_nodes() const { return n + 1; }

    bool operator==(const Grid1D& o) const { return a == o.a && b == o.b && n == o.n; }
};

/// Continuous piecewise-linear field: n+1 nodal values on a Grid1D.
struct P1Function {
    Grid1D grid;
    std::vector<double> values;  // size n+1

    P1Function() = default;
    P1Function(Grid1D g, std::vector<double> nodal) : grid(g), values(std::move(nodal)) {
        if (static_cast<int>(values.size()) != grid.n + 1)
            throw ShapeMismatch("P1Function needs n+1 nodal values");
    }

    static P1Function zeros(Grid1D g) { return P1Function(g, std::vector<double>(g.n + 1, 0.0)); }

    double operator()(double x) const {
        const double t = (x - grid.a) / grid.h();
        int cell = static_cast<int>(std::floor(t));
        if (cell < 0) cell = 0;
        if (cell >= grid.n) cell = grid.n - 1;
        const double local = t - cell;
        return values[cell] * (1.0 - local) + values[cell + 1] * local;
    }

    /// Value inside a known cell (local coordinate from x).
    double eval_in_cell(int cell, double x) const {
        const double local = (x - grid.node(cell)) / grid.h();
        return values[cell] * (1.0 - local) + values[cell + 1] * local;
    }

    double slope(int cell) const { return (values[cell + 1] - values[cell]) / grid.h(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Piecewise-constant field: n cell values on a Grid1D.
struct P0Function {
    Grid1D grid;
    std::vector<double> values;  // size n

    P0Function() = default;
    P0Function(Grid1D g, std::vector<double> cells) : grid(g), values(std::move(cells)) {
        if (static_cast<int>(values.size()) != grid.n)
            throw ShapeMismatch("P0Function needs n cell values");
    }

    static P0Function zeros(Grid1D g) { return P0Function(g, std::vector<double>(g.n, 0.0)); }

    double operator[](int cell) const { return values[cell]; }
};

inline P1Function interpolate(const CoeffFn& f, const Grid1D& grid) {
    std::vector<double> vals(grid.num_nodes());
    for (int i = 0; i <= grid.n; ++i) vals[i] = f.eval(grid.node(i));
    return P1Function(grid, std::move(vals));
}

/// Cellwise derivative of a P1 field.
inline P0Function derivative(const P1Function& v) {
    std::vector<double> d(v.grid.n);
    for (int i = 0; i < v.grid.n; ++i) d[i] = v.slope(i);
    return P0Function(v.grid, std::move(d));
}

/// Vector-valued P1 field, one scalar component per entry.
using VectorP1 = std::vector<P1Function>;

inline void check_same_grid(const Grid1D& g1, const Grid1D& g2, const char* what) {
    if (!(g1 == g2)) throw ShapeMismatch(std::string(what) + ": grids differ");
}

}  // namespace pmaj
