#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pmaj/errors.hpp"
#include "pmaj/expr.hpp"
#include "pmaj/grid.hpp"
#include "pmaj/nonlocal.hpp"
#include "pmaj/quadrature.hpp"

namespace pmaj {

inline double p_conjugate(double p) { return p / (p - 1.0); }

enum class ProblemKind {
    dirichlet_poisson,
    neumann_poisson,
    obstacle,
    anisotropic1d,
    vector_poisson,
    polyharmonic,
    fractional,
};

inline const char* to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::dirichlet_poisson: return "dirichlet_poisson";
        case ProblemKind::neumann_poisson: return "neumann_poisson";
        case ProblemKind::obstacle: return "obstacle";
        case ProblemKind::anisotropic1d: return "anisotropic1d";
        case ProblemKind::vector_poisson: return "vector_poisson";
        case ProblemKind::polyharmonic: return "polyharmonic";
        case ProblemKind::fractional: return "fractional";
    }
    return "?";
}

inline ProblemKind problem_kind_from_string(const std::string& s) {
    for (ProblemKind k : {ProblemKind::dirichlet_poisson, ProblemKind::neumann_poisson,
                          ProblemKind::obstacle, ProblemKind::anisotropic1d,
                          ProblemKind::vector_poisson, ProblemKind::polyharmonic,
                          ProblemKind::fractional})
        if (s == to_string(k)) return k;
    throw Error("unknown problem kind '" + s + "'");
}

/// Problem definition shared by solvers and majorants.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::dirichlet_poisson;
    double p = 2.0;
    Grid1D grid;
    std::vector<CoeffFn> h;          // 1 entry, or n_comp entries for the vector kind
    std::optional<CoeffFn> phi;      // obstacle
    std::optional<CoeffFn> a;        // scalar anisotropic weight
    int m = 0;                       // polyharmonic order (2)
    double s = 0.0;                  // fractional order in (0,1)
    int n_comp = 1;

    const CoeffFn& load() const { return h.at(0); }

    ProblemSpec with_grid(const Grid1D& g) const {
        ProblemSpec copy = *this;
        copy.grid = g;
        return copy;
    }

    /// Kind-specific construction checks. Call once after filling the fields.
    void validate(const QuadratureRule& rule = QuadratureRule(5)) const {
        if (!(p > 1.0)) throw Error("ProblemSpec: p must be > 1");
        if (h.empty()) throw Error("ProblemSpec: load h missing");
        switch (kind) {
            case ProblemKind::obstacle:
                if (!phi) throw Error("ProblemSpec: obstacle kind needs phi");
                break;
            case ProblemKind::anisotropic1d: {
                if (!a) throw Error("ProblemSpec: anisotropic kind needs weight a");
                const double nu = sampled_inf_weight(rule);
                if (!(nu > 0.0)) throw Error("ProblemSpec: weight a must be >= nu > 0");
                break;
            }
            case ProblemKind::neumann_poisson: {
                double mean = 0.0, norm = 0.0;
                for (int cell = 0; cell < grid.n; ++cell)
                    rule.over_interval(grid.node(cell), grid.node(cell + 1),
                                       [&](double x, double w) {
                                           const double hv = load().eval(x);
                                           mean += w * hv;
                                           norm += w * std::abs(hv);
                                       });
                if (std::abs(mean) > 1e-10 * std::max(norm, 1e-300))
                    throw LoadNotZeroMean("Neumann load must have zero mean");
                break;
            }
            case ProblemKind::vector_poisson:
                if (n_comp < 1 || static_cast<int>(h.size()) != n_comp)
                    throw ShapeMismatch("vector kind needs n_comp loads");
                break;
            case ProblemKind::polyharmonic:
                if (m != 2) throw UnsupportedOrder("polyharmonic kind supports m = 2 only");
                break;
            case ProblemKind::fractional:
                if (!(s > 0.0 && s < 1.0)) throw Error("fractional kind needs s in (0,1)");
                break;
            default: break;
        }
    }

    /// inf of the weight a over the quadrature nodes (sampled, recorded in
    /// reports as sampled-inf).
    double sampled_inf_weight(const QuadratureRule& rule = QuadratureRule(5)) const {
        if (!a) return 1.0;
        double nu = std::numeric_limits<double>::infinity();
        for (int cell = 0; cell < grid.n; ++cell)
            rule.over_interval(grid.node(cell), grid.node(cell + 1),
                               [&](double x, double) { nu = std::min(nu, a->eval(x)); });
        return nu;
    }
};

/// Load vector l_i = int h phi_i over the grid's hat functions.
inline std::vector<double> assemble_load(const CoeffFn& h, const Grid1D& grid,
                                         const QuadratureRule& rule) {
    std::vector<double> l(grid.num_nodes(), 0.0);
    const double hc = grid.h();
    for (int cell = 0; cell < grid.n; ++cell)
        rule.over_interval(grid.node(cell), grid.node(cell + 1), [&](double x, double w) {
            const double loc = (x - grid.node(cell)) / hc;
            const double hv = h.eval(x);
            l[cell] += w * hv * (1.0 - loc);
            l[cell + 1] += w * hv * loc;
        });
    return l;
}

inline double p1_mean(const P1Function& v) {
    double mean = 0.0;
    for (int i = 0; i < v.grid.n; ++i) mean += 0.5 * (v.values[i] + v.values[i + 1]) * v.grid.h();
    return mean / v.grid.length();
}

inline P1Function mean_subtracted(const P1Function& v) {
    P1Function out = v;
    const double mean = p1_mean(v);
    for (double& x : out.values) x -= mean;
    return out;
}

/// Discrete Laplacian of a P1 field as a P0 field: cell i carries the second
/// difference at its left node (cell 0 copies node 1).
inline P0Function discrete_laplacian(const P1Function& v) {
    const int n = v.grid.n;
    if (n < 2) throw ShapeMismatch("discrete_laplacian needs n >= 2");
    const double h2 = v.grid.h() * v.grid.h();
    std::vector<double> lap(n, 0.0);
    for (int i = 1; i < n; ++i) lap[i] = (v.values[i + 1] - 2.0 * v.values[i] + v.values[i - 1]) / h2;
    lap[0] = lap[1];
    return P0Function(v.grid, std::move(lap));
}

/// Flux tau* of an approximation v (P0, cellwise).
///   dirichlet/neumann/obstacle: |v'|^{p-2} v'
///   anisotropic1d:              a(midpoint) |v'|^{p-2} v'
///   polyharmonic (m=2):         |D2 v|^{p-2} D2 v
inline P0Function flux(const ProblemSpec& spec, const P1Function& v) {
    check_same_grid(spec.grid, v.grid, "flux");
    if (spec.kind == ProblemKind::polyharmonic) {
        P0Function lap = discrete_laplacian(v);
        for (double& t : lap.values) t = signed_power(t, spec.p);
        return lap;
    }
    std::vector<double> t(v.grid.n);
    for (int i = 0; i < v.grid.n; ++i) {
        t[i] = signed_power(v.slope(i), spec.p);
        if (spec.kind == ProblemKind::anisotropic1d) t[i] *= spec.a->eval(v.grid.midpoint(i));
    }
    return P0Function(v.grid, std::move(t));
}

/// Componentwise flux of a vector field with the coupled Euclidean magnitude:
/// |grad v|^{p-2} grad v_k per cell.
inline std::vector<P0Function> flux_vector(const ProblemSpec& spec, const VectorP1& v) {
    if (static_cast<int>(v.size()) != spec.n_comp) throw ShapeMismatch("flux_vector: n_comp");
    const Grid1D& g = spec.grid;
    std::vector<P0Function> out(v.size(), P0Function::zeros(g));
    for (int cell = 0; cell < g.n; ++cell) {
        double mag2 = 0.0;
        for (const auto& comp : v) {
            const double sl = comp.slope(cell);
            mag2 += sl * sl;
        }
        const double factor = mag2 == 0.0 ? 0.0 : std::pow(mag2, (spec.p - 2.0) / 2.0);
        for (std::size_t k = 0; k < v.size(); ++k)
            out[k].values[cell] = factor * v[k].slope(cell);
    }
    return out;
}

/// Energy functional F(v) for the scalar kinds. For the fractional kind a
/// PairQuadrature on v's grid must be supplied.
inline double energy(const ProblemSpec& spec, const P1Function& v, const QuadratureRule& rule,
                     const PairQuadrature* pq = nullptr) {
    check_same_grid(spec.grid, v.grid, "energy");
    const double p = spec.p;
    double load_term = inner_product(v, spec.load(), v.grid, rule);

    switch (spec.kind) {
        case ProblemKind::dirichlet_poisson:
        case ProblemKind::obstacle: {
            double grad = 0.0;
            for (int i = 0; i < v.grid.n; ++i)
                grad += v.grid.h() * std::pow(std::abs(v.slope(i)), p);
            return grad / p - load_term;
        }
        case ProblemKind::neumann_poisson: {
            double grad = 0.0;
            for (int i = 0; i < v.grid.n; ++i)
                grad += v.grid.h() * std::pow(std::abs(v.slope(i)), p);
            return grad / p - load_term;
        }
        case ProblemKind::anisotropic1d: {
            double grad = 0.0;
            for (int cell = 0; cell < v.grid.n; ++cell) {
                const double sl = std::abs(v.slope(cell));
                rule.over_interval(v.grid.node(cell), v.grid.node(cell + 1),
                                   [&](double x, double w) {
                                       grad += w * spec.a->eval(x) * std::pow(sl, p);
                                   });
            }
            return grad / p - load_term;
        }
        case ProblemKind::polyharmonic: {
            const P0Function lap = discrete_laplacian(v);
            double acc = 0.0;
            for (int i = 0; i < v.grid.n; ++i)
                acc += v.grid.h() * std::pow(std::abs(lap.values[i]), p);
            return acc / p - load_term;
        }
        case ProblemKind::fractional: {
            if (!pq) throw Error("energy(fractional) needs a PairQuadrature");
            return gagliardo_seminorm_pow(spec.s, p, v, *pq) / p - load_term;
        }
        default:
            throw ShapeMismatch("energy: scalar overload called for the vector kind");
    }
}

inline double energy_vector(const ProblemSpec& spec, const VectorP1& v,
                            const QuadratureRule& rule) {
    if (spec.kind != ProblemKind::vector_poisson) throw ShapeMismatch("energy_vector: wrong kind");
    if (static_cast<int>(v.size()) != spec.n_comp || static_cast<int>(spec.h.size()) != spec.n_comp)
        throw ShapeMismatch("energy_vector: n_comp");
    const Grid1D& g = spec.grid;
    double grad = 0.0;
    for (int cell = 0; cell < g.n; ++cell) {
        double mag2 = 0.0;
        for (const auto& comp : v) {
            const double sl = comp.slope(cell);
            mag2 += sl * sl;
        }
        grad += g.h() * std::pow(mag2, spec.p / 2.0);
    }
    double load_term = 0.0;
    for (int k = 0; k < spec.n_comp; ++k) load_term += inner_product(v[k], spec.h[k], g, rule);
    return grad / spec.p - load_term;
}

/// Residual pairing <A v - h, xi>. Neumann test fields are mean-corrected
/// rather than rejected. Polyharmonic pairs fluxes against D2 xi; fractional
/// needs the PairQuadrature.
inline double residual_pairing(const ProblemSpec& spec, const P1Function& v, const P1Function& xi,
                               const QuadratureRule& rule, const PairQuadrature* pq = nullptr) {
    check_same_grid(v.grid, xi.grid, "residual_pairing");
    check_same_grid(spec.grid, v.grid, "residual_pairing");
    const P1Function* test = &xi;
    P1Function corrected;
    if (spec.kind == ProblemKind::neumann_poisson) {
        corrected = mean_subtracted(xi);
        test = &corrected;
    }

    if (spec.kind == ProblemKind::fractional) {
        if (!pq) throw Error("residual_pairing(fractional) needs a PairQuadrature");
        return fractional_pairing(spec.s, spec.p, v, *test, *pq) -
               inner_product(*test, spec.load(), v.grid, rule);
    }
    if (spec.kind == ProblemKind::polyharmonic) {
        const P0Function tau = flux(spec, v);
        const P0Function lap_xi = discrete_laplacian(*test);
        double acc = 0.0;
        for (int i = 0; i < v.grid.n; ++i)
            acc += v.grid.h() * tau.values[i] * lap_xi.values[i];
        return acc - inner_product(*test, spec.load(), v.grid, rule);
    }
    const P0Function tau = flux(spec, v);
    const P0Function dxi = derivative(*test);
    double acc = 0.0;
    for (int i = 0; i < v.grid.n; ++i) acc += v.grid.h() * tau.values[i] * dxi.values[i];
    return acc - inner_product(*test, spec.load(), v.grid, rule);
}

/// Contact/free cell partition of an admissible field against the obstacle.
struct CoincidencePartition {
    CellMask contact;
    CellMask free;

    int contact_cells() const {
        int c = 0;
        for (auto m : contact) c += m;
        return c;
    }
};

inline CoincidencePartition coincidence_partition(const P1Function& v, const CoeffFn& phi,
                                                  double tol_contact = 1e-8) {
    const Grid1D& g = v.grid;
    std::vector<double> gap(g.num_nodes());
    double phi_max = 0.0;
    for (int i = 0; i <= g.n; ++i) {
        const double ph = phi.eval(g.node(i));
        phi_max = std::max(phi_max, std::abs(ph));
        gap[i] = v.values[i] - ph;
    }
    const double scale = std::max(1.0, phi_max);
    for (int i = 0; i <= g.n; ++i)
        if (gap[i] < -10.0 * tol_contact * scale)
            throw NotAdmissible("field lies below the obstacle at node " + std::to_string(i));

    CoincidencePartition part;
    part.contact.assign(g.n, 0);
    part.free.assign(g.n, 0);
    for (int cell = 0; cell < g.n; ++cell) {
        const bool contact =
            gap[cell] <= tol_contact * scale && gap[cell + 1] <= tol_contact * scale;
        part.contact[cell] = contact ? 1 : 0;
        part.free[cell] = contact ? 0 : 1;
    }
    return part;
}

}  // namespace pmaj
