// pmaj: batch harness for guaranteed a posteriori error bounds of
// p-Laplacian-type problems. Subcommands: solve, estimate, sweep, ineq,
// constants. Exit codes: 0 success, 1 config error, 2 sandwich violation.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "pmaj/report.hpp"
#include "pmaj/sweep.hpp"

namespace fs = std::filesystem;
using namespace pmaj;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path, "/");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what(), "/");
    }
    return j;
}

void require(bool cond, const std::string& what, const std::string& pointer) {
    if (!cond) throw ConfigError(what, pointer);
}

struct RunConfig {
    ProblemSpec problem;
    SweepOptions sweep;
    std::string out_json, out_csv, out_svg;
};

CoeffFn coeff_field(const json& j, const std::string& ptr) {
    require(j.is_string(), "expected an expression string", ptr);
    try {
        return parse_coeff(j.get<std::string>());
    } catch (const Error& e) {
        throw ConfigError(std::string("bad expression: ") + e.what(), ptr);
    }
}

RunConfig parse_config(const json& j) {
    RunConfig cfg;
    require(j.is_object(), "config must be a JSON object", "/");
    require(j.contains("problem") && j["problem"].is_object(), "missing problem object",
            "/problem");
    const json& jp = j["problem"];

    require(jp.contains("kind") && jp["kind"].is_string(), "missing problem kind",
            "/problem/kind");
    try {
        cfg.problem.kind = problem_kind_from_string(jp["kind"].get<std::string>());
    } catch (const Error& e) {
        throw ConfigError(e.what(), "/problem/kind");
    }
    require(jp.contains("p") && jp["p"].is_number(), "missing exponent p", "/problem/p");
    cfg.problem.p = jp["p"].get<double>();
    require(cfg.problem.p > 1.0, "p must be > 1", "/problem/p");

    require(jp.contains("domain") && jp["domain"].is_object(), "missing problem domain {a,b}",
            "/problem/domain");
    const double a = jp["domain"].value("a", 0.0);
    const double b = jp["domain"].value("b", 1.0);
    require(a < b, "domain needs a < b", "/problem/domain");
    cfg.problem.grid = Grid1D(a, b, 1);  // cell count comes from reference.n_ref

    require(jp.contains("h"), "missing load h", "/problem/h");
    if (jp["h"].is_array()) {
        for (std::size_t k = 0; k < jp["h"].size(); ++k)
            cfg.problem.h.push_back(coeff_field(jp["h"][k], "/problem/h/" + std::to_string(k)));
    } else {
        cfg.problem.h.push_back(coeff_field(jp["h"], "/problem/h"));
    }
    if (jp.contains("phi")) cfg.problem.phi = coeff_field(jp["phi"], "/problem/phi");
    if (jp.contains("a")) cfg.problem.a = coeff_field(jp["a"], "/problem/a");
    if (jp.contains("m")) cfg.problem.m = jp["m"].get<int>();
    if (jp.contains("s")) cfg.problem.s = jp["s"].get<double>();
    cfg.problem.n_comp = jp.value("n_comp", static_cast<int>(cfg.problem.h.size()));

    const std::string mode = j.value("constants_mode", std::string("rigorous"));
    require(mode == "exact" || mode == "rigorous", "constants_mode must be exact|rigorous",
            "/constants_mode");
    cfg.sweep.constants_mode = mode == "exact" ? ConstantsMode::exact : ConstantsMode::rigorous;

    if (j.contains("reference")) {
        const json& jr = j["reference"];
        cfg.sweep.reference_method = jr.value("method", std::string("auto"));
        require(cfg.sweep.reference_method == "auto" ||
                    cfg.sweep.reference_method == "shooting" ||
                    cfg.sweep.reference_method == "descent",
                "reference method must be auto|shooting|descent", "/reference/method");
        cfg.sweep.n_ref = jr.value("n_ref", 512);
        require(cfg.sweep.n_ref >= 4, "n_ref too small", "/reference/n_ref");
    }

    if (j.contains("approximations")) {
        require(j["approximations"].is_array() && !j["approximations"].empty(),
                "approximations must be a non-empty array", "/approximations");
        cfg.sweep.coarse_ns.clear();
        for (std::size_t k = 0; k < j["approximations"].size(); ++k) {
            const json& e = j["approximations"][k];
            require(e.is_number_integer() && e.get<int>() >= 1,
                    "approximations entries must be positive integers",
                    "/approximations/" + std::to_string(k));
            cfg.sweep.coarse_ns.push_back(e.get<int>());
        }
    }
    for (int cn : cfg.sweep.coarse_ns) {
        require(cfg.sweep.n_ref % cn == 0, "n_ref must be divisible by every coarse_n",
                "/approximations");
        require(cfg.sweep.n_ref >= 4 * cn, "n_ref must be >= 4x max(coarse_n)",
                "/reference/n_ref");
    }

    if (j.contains("eta_star")) {
        cfg.sweep.eta_variants.clear();
        const json& je = j["eta_star"];
        auto add_variant = [&](const json& e, const std::string& ptr) {
            if (e.is_string()) {
                const std::string v = e.get<std::string>();
                require(v == "ideal" || v == "postprocessed",
                        "eta_star must be ideal|postprocessed|{expression}", ptr);
                cfg.sweep.eta_variants.push_back(v);
            } else if (e.is_object() && e.contains("expression")) {
                coeff_field(e["expression"], ptr + "/expression");  // validates
                cfg.sweep.eta_expression = e["expression"].get<std::string>();
                cfg.sweep.eta_variants.push_back("expression");
            } else {
                throw ConfigError("eta_star must be ideal|postprocessed|{expression}", ptr);
            }
        };
        if (je.is_array()) {
            for (std::size_t k = 0; k < je.size(); ++k)
                add_variant(je[k], "/eta_star/" + std::to_string(k));
        } else {
            add_variant(je, "/eta_star");
        }
    }

    if (j.contains("quadrature")) {
        cfg.sweep.quad_order = j["quadrature"].value("order", 5);
        cfg.sweep.grading_depth = j["quadrature"].value("grading_depth", 8);
        require(cfg.sweep.quad_order >= 1 && cfg.sweep.quad_order <= 64,
                "quadrature order out of range", "/quadrature/order");
    }

    cfg.sweep.seed = j.value("seed", 42ULL);

    if (j.contains("output")) {
        cfg.out_json = j["output"].value("json", std::string());
        cfg.out_csv = j["output"].value("csv", std::string());
        cfg.out_svg = j["output"].value("svg", std::string());
    }
    return cfg;
}

std::string output_path(const std::string& out_dir, const std::string& name,
                        const std::string& fallback) {
    const std::string file = name.empty() ? fallback : name;
    if (file.empty()) return {};
    if (out_dir.empty() || fs::path(file).is_absolute()) return file;
    return (fs::path(out_dir) / file).string();
}

std::string timestamp_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

int cmd_sweep_like(const std::string& config_path, const std::string& out_dir, bool quiet,
                   bool single_estimate) {
    RunConfig cfg = parse_config(load_json_file(config_path));
    if (single_estimate) {
        cfg.sweep.coarse_ns.resize(1);
        cfg.sweep.eta_variants.resize(1);
    }
    if (!out_dir.empty()) fs::create_directories(out_dir);

    const SweepOutcome out = run_sweep(cfg.problem, cfg.sweep);

    json doc = sweep_to_json(out);
    doc["timestamp"] = timestamp_now();
    doc["seed"] = cfg.sweep.seed;

    const std::string jpath = output_path(out_dir, cfg.out_json, "report.json");
    if (!jpath.empty()) write_text_file(jpath, doc.dump(2) + "\n");
    const std::string cpath = output_path(out_dir, cfg.out_csv, single_estimate ? "" : "sweep.csv");
    if (!cpath.empty()) write_text_file(cpath, sweep_to_csv(out));
    if (!cfg.out_svg.empty())
        write_text_file(output_path(out_dir, cfg.out_svg, ""), sweep_to_svg(out));

    if (!quiet) {
        for (const auto& row : out.rows)
            std::printf("coarse_n=%-4d eta=%-13s error=%-12.6g majorant=%-12.6g eff=%-8.4g "
                        "lower=%-12.6g %s\n",
                        row.coarse_n, row.eta.c_str(), row.report.error_measure,
                        row.report.majorant, row.report.efficiency, row.lower_bound,
                        row.sandwich_ok && row.ordering_ok ? "ok" : "VIOLATION");
        std::printf("reference: %s, est_accuracy=%.3g; sandwich %s, ordering %s\n",
                    to_string(out.ref.provenance), out.ref.est_accuracy,
                    out.all_sandwich_ok ? "ok" : "VIOLATED",
                    out.all_ordering_ok ? "ok" : "VIOLATED");
    }
    const bool certified_ok = out.all_sandwich_ok && out.all_ordering_ok;
    return certified_ok ? 0 : 2;
}

int cmd_solve(const std::string& config_path, const std::string& out_dir, bool quiet) {
    RunConfig cfg = parse_config(load_json_file(config_path));
    if (!out_dir.empty()) fs::create_directories(out_dir);

    SweepOptions& opt = cfg.sweep;
    const QuadratureRule rule(opt.quad_order);
    ProblemSpec full = cfg.problem;
    full.grid = Grid1D(full.grid.a, full.grid.b, opt.n_ref);
    full.validate(rule);

    std::shared_ptr<PairQuadrature> pq;
    if (full.kind == ProblemKind::fractional)
        pq = std::make_shared<PairQuadrature>(full.grid, opt.quad_order, opt.grading_depth, 0.5);
    const ReferenceSolution ref = solve_reference(full, opt, rule, pq.get());

    json doc{{"problem", {{"kind", to_string(full.kind)}, {"p", full.p}, {"grid", full.grid}}},
             {"method", to_string(ref.provenance)},
             {"est_accuracy", ref.est_accuracy},
             {"converged", ref.converged},
             {"iters", ref.iters},
             {"field", ref.field},
             {"timestamp", timestamp_now()}};
    if (full.kind == ProblemKind::vector_poisson) doc["components"] = ref.components;

    const std::string jpath = output_path(out_dir, cfg.out_json, "solution.json");
    write_text_file(jpath, doc.dump(2) + "\n");
    if (!quiet)
        std::printf("solved %s (p=%g, n=%d): est_accuracy=%.3g -> %s\n", to_string(full.kind),
                    full.p, full.grid.n, ref.est_accuracy, jpath.c_str());
    return 0;
}

int cmd_ineq(std::uint64_t seed, long trials, const std::string& out_dir, bool quiet) {
    const IneqSuiteReport rep = run_suite(seed, trials);
    json doc = rep;
    doc["timestamp"] = timestamp_now();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text_file((fs::path(out_dir) / "ineq_report.json").string(), doc.dump(2) + "\n");
    } else {
        std::cout << doc.dump(2) << "\n";
    }
    if (!quiet)
        std::fprintf(stderr, "inequality suite: %ld violations across %zu checks\n",
                     rep.total_violations(), rep.results.size());
    return rep.total_violations() == 0 ? 0 : 2;
}

int cmd_constants(double p, double a, double b, const std::string& mode_str,
                  const std::string& out_dir, bool quiet) {
    const double L = b - a;
    if (!(L > 0.0) || !(p > 1.0)) throw ConfigError("need p > 1 and a < b", "/");
    const ConstantsMode mode =
        mode_str == "exact" ? ConstantsMode::exact : ConstantsMode::rigorous;

    json table = json::object();
    const auto [lo, hi] = bd_ball_bounds(p, 1, L / 2.0);
    table["lambda1_ball_lower"] = lo;
    table["lambda1_ball_upper"] = hi;
    table["lambda1_faber_krahn_lower"] = faber_krahn_lower(p, 1, L);
    table["lambda1_exact"] = lambda1_exact_1d(p, L);
    table["C_F"] = friedrichs_upper(p, L, mode);
    table["C_P"] = poincare_constant_1d(p, L, mode);
    table["C_T"] = trace_constant_1d(p, L);
    table["C_F2"] = embedding_constant_polyharm(2, p, L, mode);

    json doc{{"p", p}, {"domain", {{"a", a}, {"b", b}}}, {"mode", mode_str},
             {"constants", table}, {"timestamp", timestamp_now()}};

    std::string csv = "name,value,provenance\n";
    char buf[160];
    for (const auto& [name, val] : table.items()) {
        if (val.is_object())
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%s\n", name.c_str(),
                          val["value"].get<double>(),
                          val["provenance"].get<std::string>().c_str());
        else
            std::snprintf(buf, sizeof(buf), "%s,%.17g,closed_form\n", name.c_str(),
                          val.get<double>());
        csv += buf;
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text_file((fs::path(out_dir) / "constants.json").string(), doc.dump(2) + "\n");
        write_text_file((fs::path(out_dir) / "constants.csv").string(), csv);
    }
    if (!quiet) std::cout << doc.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"guaranteed a posteriori error bounds for p-Laplacian-type problems"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, out_dir;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON run configuration")->envname("PMAJ_CONFIG");
    app.add_option("--out-dir", out_dir, "output directory for report files");
    app.add_flag("--quiet", quiet, "suppress console summaries");

    auto* solve = app.add_subcommand("solve", "compute and store a reference solution");
    auto* estimate = app.add_subcommand("estimate", "one majorant report for the first case");
    auto* sweep = app.add_subcommand("sweep", "full error/majorant sweep with reports");

    auto* ineq = app.add_subcommand("ineq", "run the algebraic inequality suite");
    std::uint64_t seed = 42;
    long trials = 100000;
    ineq->add_option("--seed", seed, "PRNG seed");
    ineq->add_option("--trials", trials, "samples per inequality");

    auto* constants = app.add_subcommand("constants", "print certified constants for (p, domain)");
    double copt_p = 2.0, copt_a = 0.0, copt_b = 1.0;
    std::string copt_mode = "rigorous";
    constants->add_option("--p", copt_p, "exponent p");
    constants->add_option("--a", copt_a, "left endpoint");
    constants->add_option("--b", copt_b, "right endpoint");
    constants->add_option("--mode", copt_mode, "exact | rigorous")
        ->check(CLI::IsMember({"exact", "rigorous"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            if (config_path.empty()) throw ConfigError("--config required", "/");
            return cmd_solve(config_path, out_dir, quiet);
        }
        if (estimate->parsed()) {
            if (config_path.empty()) throw ConfigError("--config required", "/");
            return cmd_sweep_like(config_path, out_dir, quiet, true);
        }
        if (sweep->parsed()) {
            if (config_path.empty()) throw ConfigError("--config required", "/");
            return cmd_sweep_like(config_path, out_dir, quiet, false);
        }
        if (ineq->parsed()) return cmd_ineq(seed, trials, out_dir, quiet);
        if (constants->parsed())
            return cmd_constants(copt_p, copt_a, copt_b, copt_mode, out_dir, quiet);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
