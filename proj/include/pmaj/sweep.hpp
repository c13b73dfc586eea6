#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pmaj/certified.hpp"
#include "pmaj/constants.hpp"
#include "pmaj/majorant.hpp"
#include "pmaj/problem.hpp"
#include "pmaj/report.hpp"
#include "pmaj/solve.hpp"

namespace pmaj {

struct SweepOptions {
    ConstantsMode constants_mode = ConstantsMode::rigorous;
    std::string reference_method = "auto";  // auto | shooting | descent
    int n_ref = 512;
    std::vector<int> coarse_ns = {2, 4, 8, 16, 32};
    std::vector<std::string> eta_variants = {"ideal", "postprocessed"};
    std::optional<std::string> eta_expression;
    int quad_order = 5;
    int grading_depth = 8;
    std::uint64_t seed = 42;
    double budget = 1e-4;  // quadrature budget added on the majorant side
    int probe_iters = 40;
    DescentOptions descent = make_default_descent();

    static DescentOptions make_default_descent() {
        DescentOptions d;
        d.max_iters = 20000;
        d.grad_tol = 1e-10;
        return d;
    }
};

struct SweepRow {
    int coarse_n = 0;
    std::string eta;
    MajorantReport report;
    double lower_bound = 0.0;
    double dual_lower = 0.0;
    bool sandwich_ok = true;
    bool ordering_ok = true;
};

struct SweepOutcome {
    ProblemSpec spec;
    ReferenceSolution ref;
    std::map<std::string, CertifiedBound> constants;
    std::vector<SweepRow> rows;
    std::shared_ptr<PairQuadrature> pq;  // fractional kind only
    bool all_sandwich_ok = true;
    bool all_ordering_ok = true;
};

/// Lift a P0 field to P1 by averaging adjacent cell values at interior nodes
/// (one-sided at the ends) - the standard nodal flux recovery.
inline P1Function p0_node_average(const P0Function& f) {
    const Grid1D& g = f.grid;
    std::vector<double> nodes(g.num_nodes());
    nodes.front() = f.values.front();
    nodes.back() = f.values.back();
    for (int i = 1; i < g.n; ++i) nodes[i] = 0.5 * (f.values[i - 1] + f.values[i]);
    return P1Function(g, std::move(nodes));
}

namespace detail {

inline P1Function ideal_eta(const ProblemSpec& spec, const ReferenceSolution& ref) {
    if (ref.has_exact_flux) return ref.exact_flux;
    if (spec.kind == ProblemKind::polyharmonic)
        return p0_node_average(discrete_laplacian(ref.field));
    P1Function eta = p0_node_average(flux(spec, ref.field));
    if (spec.kind == ProblemKind::neumann_poisson) {
        // the exact Neumann flux vanishes on the boundary
        eta.values.front() = 0.0;
        eta.values.back() = 0.0;
    }
    return eta;
}

inline P1Function postprocessed_eta(const ProblemSpec& spec, const P1Function& v) {
    if (spec.kind == ProblemKind::polyharmonic)
        return p0_node_average(discrete_laplacian(v));
    return p0_node_average(flux(spec, v));
}

/// Energy-gap lower bound on the error measure, using u_ref as the test
/// field w of the underlying proposition. `cap_pow` is the kind-specific
/// upper bound on the exact solution's energy seminorm to the p-th power
/// (C_F^{p'}||h||^{p'}, C_i^p, C_3^p, ...), and `measure_pow` the p-th power
/// of the approximation's own seminorm.
inline double energy_gap_lower_bound(double p, double gap, double cap_pow, double measure_pow,
                                     double scale = 1.0) {
    gap = std::max(gap, 0.0);
    if (gap == 0.0) return 0.0;
    if (p <= 2.0) return std::pow(std::pow(2.0, p - 2.0) * gap / scale, 1.0 / p);
    const double base = cap_pow + measure_pow;
    const double factor = std::pow(p - 1.0, -1.0) * std::pow(2.0, (2.0 - p) / p) *
                          std::pow(base, (2.0 - p) / p) / scale;
    return std::sqrt(factor * gap);
}

}  // namespace detail

/// Reference solve for a problem spec on its own grid.
inline ReferenceSolution solve_reference(const ProblemSpec& spec, const SweepOptions& opt,
                                         const QuadratureRule& rule,
                                         const PairQuadrature* pq = nullptr) {
    switch (spec.kind) {
        case ProblemKind::dirichlet_poisson:
            if (opt.reference_method != "descent")
                return solve_dirichlet_flux_shooting(spec.p, spec.load(), spec.grid,
                                                     opt.quad_order);
            return minimize_energy(spec, P1Function::zeros(spec.grid), opt.descent, rule);
        case ProblemKind::anisotropic1d:
        case ProblemKind::neumann_poisson:
            return minimize_energy(spec, P1Function::zeros(spec.grid), opt.descent, rule);
        case ProblemKind::obstacle: {
            P1Function init = P1Function::zeros(spec.grid);
            for (int i = 0; i <= spec.grid.n; ++i)
                init.values[i] = std::max(0.0, spec.phi->eval(spec.grid.node(i)));
            init.values.front() = 0.0;
            init.values.back() = 0.0;
            return minimize_energy(spec, init, opt.descent, rule);
        }
        case ProblemKind::vector_poisson: {
            VectorP1 init(spec.n_comp, P1Function::zeros(spec.grid));
            return minimize_energy_vector(spec, init, opt.descent, rule);
        }
        case ProblemKind::polyharmonic:
            return solve_polyharmonic_1d(spec, opt.descent, rule);
        case ProblemKind::fractional: {
            if (!pq) throw Error("solve_reference(fractional) needs PairQuadrature");
            return solve_fractional_galerkin(spec, *pq, opt.descent, rule);
        }
    }
    throw Error("solve_reference: unknown kind");
}

/// Error measure of v against u_ref in the kind's natural seminorm.
inline double error_measure(const ProblemSpec& spec, const ReferenceSolution& ref,
                            const P1Function& v, const PairQuadrature* pq = nullptr) {
    switch (spec.kind) {
        case ProblemKind::polyharmonic: {
            const P0Function lu = discrete_laplacian(ref.field);
            const P0Function lv = discrete_laplacian(v);
            double acc = 0.0;
            for (int i = 0; i < spec.grid.n; ++i)
                acc += spec.grid.h() * std::pow(std::abs(lu.values[i] - lv.values[i]), spec.p);
            return std::pow(acc, 1.0 / spec.p);
        }
        case ProblemKind::fractional: {
            if (!pq) throw Error("error_measure(fractional) needs PairQuadrature");
            P1Function diff = ref.field;
            for (int i = 0; i <= spec.grid.n; ++i) diff.values[i] -= v.values[i];
            return gagliardo_seminorm(spec.s, spec.p, diff, *pq);
        }
        default: {
            double acc = 0.0;
            for (int i = 0; i < spec.grid.n; ++i)
                acc += spec.grid.h() *
                       std::pow(std::abs(ref.field.slope(i) - v.slope(i)), spec.p);
            return std::pow(acc, 1.0 / spec.p);
        }
    }
}

inline double error_measure_vector(const ProblemSpec& spec, const ReferenceSolution& ref,
                                   const VectorP1& v) {
    double acc = 0.0;
    for (int cell = 0; cell < spec.grid.n; ++cell) {
        double mag2 = 0.0;
        for (int k = 0; k < spec.n_comp; ++k) {
            const double d = ref.components[k].slope(cell) - v[k].slope(cell);
            mag2 += d * d;
        }
        acc += spec.grid.h() * std::pow(mag2, spec.p / 2.0);
    }
    return std::pow(acc, 1.0 / spec.p);
}

/// Full sweep: reference solve, certified constants, crude approximations
/// times eta* variants, majorant + lower bound + dual-norm probe per case,
/// sandwich and ordering checks.
inline SweepOutcome run_sweep(const ProblemSpec& base, const SweepOptions& opt) {
    SweepOutcome out;
    out.spec = base.with_grid(Grid1D(base.grid.a, base.grid.b, opt.n_ref));
    const ProblemSpec& spec = out.spec;
    const QuadratureRule rule(opt.quad_order);
    spec.validate(rule);

    for (int cn : opt.coarse_ns)
        if (opt.n_ref < 4 * cn)
            throw ConfigError("n_ref must be at least 4x the coarsest approximation",
                              "/reference/n_ref");

    if (spec.kind == ProblemKind::fractional)
        out.pq = std::make_shared<PairQuadrature>(spec.grid, opt.quad_order, opt.grading_depth,
                                                  0.5);

    out.ref = solve_reference(spec, opt, rule, out.pq.get());

    const double L = spec.grid.length();
    const double p = spec.p;
    const double pc = p_conjugate(p);

    // constants by kind
    CertifiedBound C_main(1.0, Provenance::exact, "unused");
    CertifiedBound C_trace(1.0, Provenance::exact, "unused");
    switch (spec.kind) {
        case ProblemKind::neumann_poisson:
            C_main = poincare_constant_1d(p, L, opt.constants_mode);
            C_trace = trace_constant_1d(p, L);
            out.constants.emplace("C_P", C_main);
            out.constants.emplace("C_T", C_trace);
            break;
        case ProblemKind::polyharmonic:
            C_main = embedding_constant_polyharm(2, p, L, opt.constants_mode);
            out.constants.emplace("C_F2", C_main);
            break;
        case ProblemKind::fractional:
            C_main = embedding_constant_fractional(spec.s, p, spec.grid,
                                                   std::min(opt.n_ref, 64));
            out.constants.emplace("C_Fs", C_main);
            break;
        default:
            C_main = friedrichs_upper(p, L, opt.constants_mode);
            out.constants.emplace("C_F", C_main);
            break;
    }

    // fractional ideal kernel (falls back to the zero kernel when the strong
    // divergence of a P1 flux kernel is outside L^{p'}, i.e. s >= 1 - 1/p)
    std::optional<KernelField> ideal_kernel;
    if (spec.kind == ProblemKind::fractional) {
        if (spec.s < 1.0 - 1.0 / p)
            ideal_kernel = flux_kernel(spec.s, p, out.ref.field);
        else
            ideal_kernel = zero_kernel(spec.s * (p - 1.0));
    }

    const double h_norm = lq_norm(spec.load(), pc, spec.grid, rule);

    for (int cn : opt.coarse_ns) {
        // crude approximations (vector kind handled componentwise)
        VectorP1 v_vec;
        P1Function v;
        if (spec.kind == ProblemKind::vector_poisson) {
            v_vec = make_crude_approx_vector(out.ref.components, cn);
            v = v_vec.front();
        } else {
            v = make_crude_approx(out.ref.field, cn, &spec);
        }

        for (const std::string& variant : opt.eta_variants) {
            SweepRow row;
            row.coarse_n = cn;
            row.eta = variant;

            double err = 0.0, gap = 0.0;
            if (spec.kind == ProblemKind::vector_poisson) {
                VectorP1 eta(spec.n_comp, P1Function::zeros(spec.grid));
                if (variant == "ideal") {
                    const auto tau_ref = flux_vector(spec, out.ref.components);
                    for (int k = 0; k < spec.n_comp; ++k) eta[k] = p0_node_average(tau_ref[k]);
                } else if (variant == "postprocessed") {
                    const auto tau_v = flux_vector(spec, v_vec);
                    for (int k = 0; k < spec.n_comp; ++k) eta[k] = p0_node_average(tau_v[k]);
                } else if (opt.eta_expression) {
                    for (int k = 0; k < spec.n_comp; ++k)
                        eta[k] = interpolate(parse_coeff(*opt.eta_expression), spec.grid);
                }
                row.report = majorant_vector(p, v_vec, eta, C_main, spec.h, rule);
                err = error_measure_vector(spec, out.ref, v_vec);
                gap = energy_vector(spec, v_vec, rule) -
                      energy_vector(spec, out.ref.components, rule);
                row.lower_bound = detail::energy_gap_lower_bound(
                    p, gap, std::pow(C_main.value, pc) * std::pow(h_norm, pc),
                    grad_lp_norm_pow_vector(v_vec, p));
                row.dual_lower = dual_norm_lower_discrete_vector(spec, v_vec, opt.probe_iters,
                                                                 rule);
            } else if (spec.kind == ProblemKind::fractional) {
                const KernelField* gamma = nullptr;
                KernelField post;
                if (variant == "ideal") {
                    gamma = &*ideal_kernel;
                } else {
                    if (spec.s < 1.0 - 1.0 / p)
                        post = flux_kernel(spec.s, p, v);
                    else
                        post = zero_kernel(spec.s * (p - 1.0));
                    gamma = &post;
                }
                row.report =
                    majorant_fractional(spec.s, p, v, gamma, C_main, spec.load(), *out.pq,
                                        false, rule);
                err = error_measure(spec, out.ref, v, out.pq.get());
                gap = energy(spec, v, rule, out.pq.get()) -
                      energy(spec, out.ref.field, rule, out.pq.get());
                row.lower_bound = detail::energy_gap_lower_bound(
                    p, gap, std::pow(C_main.value, pc) * std::pow(h_norm, pc),
                    gagliardo_seminorm_pow(spec.s, p, v, *out.pq));
                row.dual_lower = dual_norm_lower_discrete(spec, v, 0, opt.probe_iters, rule,
                                                          out.pq.get());
            } else {
                P1Function eta = P1Function::zeros(spec.grid);
                if (variant == "ideal") eta = detail::ideal_eta(spec, out.ref);
                else if (variant == "postprocessed") eta = detail::postprocessed_eta(spec, v);
                else if (variant == "expression" && opt.eta_expression)
                    eta = interpolate(parse_coeff(*opt.eta_expression), spec.grid);

                switch (spec.kind) {
                    case ProblemKind::dirichlet_poisson:
                        row.report = majorant_poisson(p, v, eta, C_main, spec.load(), rule);
                        break;
                    case ProblemKind::obstacle:
                        row.report = majorant_obstacle(p, v, eta, *spec.phi, C_main, spec.load(),
                                                       0.0, 1e-8, rule);
                        break;
                    case ProblemKind::anisotropic1d:
                        row.report =
                            majorant_anisotropic(p, v, eta, *spec.a, C_main, spec.load(), rule);
                        break;
                    case ProblemKind::neumann_poisson:
                        row.report =
                            majorant_neumann(p, v, eta, C_main, C_trace, spec.load(), rule);
                        break;
                    case ProblemKind::polyharmonic:
                        row.report = majorant_polyharmonic(p, 2, v, eta,
                                                           spec.phi ? &*spec.phi : nullptr,
                                                           C_main, spec.load(), 0.0, rule);
                        break;
                    default: break;
                }
                err = error_measure(spec, out.ref, v);
                gap = energy(spec, v, rule) - energy(spec, out.ref.field, rule);

                double cap_pow = 0.0, measure_pow = 0.0, scale = 1.0;
                switch (spec.kind) {
                    case ProblemKind::dirichlet_poisson:
                        cap_pow = std::pow(C_main.value, pc) * std::pow(h_norm, pc);
                        measure_pow = std::pow(grad_lp_norm(v, p), p);
                        break;
                    case ProblemKind::neumann_poisson:
                        cap_pow = std::pow(C_main.value, pc) * std::pow(h_norm, pc);
                        measure_pow = std::pow(grad_lp_norm(v, p), p);
                        break;
                    case ProblemKind::obstacle: {
                        const auto ci = obstacle_energy_bounds(p, v, spec.load(), C_main, 0.0,
                                                               rule);
                        cap_pow = std::pow(std::min(ci.first, ci.second), p);
                        measure_pow = std::pow(grad_lp_norm(v, p), p);
                        break;
                    }
                    case ProblemKind::anisotropic1d: {
                        const double nu = spec.sampled_inf_weight(rule);
                        double sup_a = 0.0;
                        for (int cell = 0; cell < spec.grid.n; ++cell)
                            rule.over_interval(spec.grid.node(cell), spec.grid.node(cell + 1),
                                               [&](double x, double) {
                                                   sup_a = std::max(sup_a, spec.a->eval(x));
                                               });
                        cap_pow = std::pow(nu, -pc) * std::pow(C_main.value, pc) *
                                  std::pow(h_norm, pc);
                        measure_pow = std::pow(grad_lp_norm(v, p), p);
                        scale = sup_a;
                        break;
                    }
                    case ProblemKind::polyharmonic: {
                        const double C3 = polyharm_energy_bound(p, P1Function::zeros(spec.grid),
                                                                spec.load(), C_main, rule);
                        cap_pow = std::pow(C3, p);
                        measure_pow = p0_lp_norm_pow(discrete_laplacian(v), p);
                        break;
                    }
                    default: break;
                }
                row.lower_bound =
                    detail::energy_gap_lower_bound(p, gap, cap_pow, measure_pow, scale);
                row.dual_lower = dual_norm_lower_discrete(spec, v, 0, opt.probe_iters, rule);
            }

            row.report.set_error(err, out.ref.est_accuracy);
            const double budget = opt.budget + out.ref.est_accuracy;
            row.sandwich_ok = (row.lower_bound <= err + out.ref.est_accuracy + opt.budget) &&
                              (err <= row.report.majorant + budget);
            row.ordering_ok =
                row.dual_lower <= row.report.dual_norm_bound * (1.0 + 1e-9) + 1e-12;
            out.all_sandwich_ok = out.all_sandwich_ok && row.sandwich_ok;
            out.all_ordering_ok = out.all_ordering_ok && row.ordering_ok;
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

/// JSON document for a sweep outcome (timestamp injected by the CLI).
inline json sweep_to_json(const SweepOutcome& out) {
    json jconstants = json::object();
    for (const auto& [name, c] : out.constants) jconstants[name] = c;
    json jrows = json::array();
    for (const auto& row : out.rows) {
        json r = row.report;
        r["coarse_n"] = row.coarse_n;
        r["eta"] = row.eta;
        r["lower_bound"] = row.lower_bound;
        r["dual_norm_lower_discrete"] = row.dual_lower;
        r["sandwich_ok"] = row.sandwich_ok;
        r["ordering_ok"] = row.ordering_ok;
        jrows.push_back(std::move(r));
    }
    return json{{"problem",
                 {{"kind", to_string(out.spec.kind)},
                  {"p", out.spec.p},
                  {"grid", out.spec.grid},
                  {"s", out.spec.s},
                  {"m", out.spec.m},
                  {"n_comp", out.spec.n_comp}}},
                {"reference",
                 {{"method", to_string(out.ref.provenance)},
                  {"est_accuracy", out.ref.est_accuracy},
                  {"converged", out.ref.converged},
                  {"iters", out.ref.iters}}},
                {"constants", jconstants},
                {"rows", jrows},
                {"all_sandwich_ok", out.all_sandwich_ok},
                {"all_ordering_ok", out.all_ordering_ok}};
}

inline std::string sweep_to_csv(const SweepOutcome& out) {
    std::string csv = "kind,p,n,coarse_n,eta,error,lower,majorant,efficiency,certified\n";
    char buf[256];
    for (const auto& row : out.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%d,%s,%.17g,%.17g,%.17g,%.17g,%d\n",
                      to_string(out.spec.kind), out.spec.p, out.spec.grid.n, row.coarse_n,
                      row.eta.c_str(), row.report.error_measure, row.lower_bound,
                      row.report.majorant, row.report.efficiency,
                      row.report.certified ? 1 : 0);
        csv += buf;
    }
    return csv;
}

inline std::string sweep_to_svg(const SweepOutcome& out) {
    SvgSeries err{"error", "#1f77b4", {}}, maj{"majorant", "#d62728", {}},
        low{"lower_bound", "#2ca02c", {}};
    const std::string lead = out.rows.empty() ? std::string() : out.rows.front().eta;
    for (const auto& row : out.rows) {
        if (row.eta != lead) continue;
        err.points.push_back({static_cast<double>(row.coarse_n), row.report.error_measure});
        maj.points.push_back({static_cast<double>(row.coarse_n), row.report.majorant});
        if (row.lower_bound > 0.0)
            low.points.push_back({static_cast<double>(row.coarse_n), row.lower_bound});
    }
    return render_loglog_svg({err, maj, low}, "coarse_n", "error / bound");
}

}  // namespace pmaj
