#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pmaj/errors.hpp"
#include "pmaj/rng.hpp"

namespace pmaj {

using Vec = Eigen::VectorXd;

/// Symmetric matrix playing the anisotropy A(x); checked symmetric on
/// construction, positive definiteness checked where required.
struct SymMatrix {
    Eigen::MatrixXd M;

    explicit SymMatrix(Eigen::MatrixXd mat) : M(std::move(mat)) {
        if (M.rows() != M.cols()) throw ShapeMismatch("SymMatrix must be square");
        const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
        if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
            throw ShapeMismatch("SymMatrix must be symmetric to 1e-14");
    }

    static SymMatrix identity(int n) { return SymMatrix(Eigen::MatrixXd::Identity(n, n)); }
    static SymMatrix diag(const std::vector<double>& d) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<int>(d.size()),
                                                  static_cast<int>(d.size()));
        for (int i = 0; i < m.rows(); ++i) m(i, i) = d[static_cast<std::size_t>(i)];
        return SymMatrix(std::move(m));
    }

    int dim() const { return static_cast<int>(M.rows()); }

    std::pair<double, double> eigen_range() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
        return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
    }

    void require_positive_definite() const {
        if (!(eigen_range().first > 0.0))
            throw NotPositiveDefinite("SymMatrix must be positive definite");
    }
};

/// Absolute and relative slack of an inequality; slack >= 0 means it holds.
/// Relative slack divides by max(|LHS|, |RHS|, 1e-300).
struct SlackPair {
    double abs_slack = 0.0;
    double rel_slack = 0.0;

    static SlackPair of(double lhs_minus_rhs, double lhs, double rhs) {
        SlackPair s;
        s.abs_slack = lhs_minus_rhs;
        s.rel_slack = lhs_minus_rhs / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        return s;
    }
};

inline Vec vector_flux(const Vec& v, double p) {
    const double n = v.norm();
    if (n == 0.0) return Vec::Zero(v.size());
    return std::pow(n, p - 2.0) * v;
}

/// Monotonicity inequality of the p-flux map:
///   p >= 2: (G(b)-G(a)).(b-a) >= 2^{2-p} |b-a|^p
///   p <  2: (G(b)-G(a)).(b-a) >= (p-1)|b-a|^2 / (|b|+|a|)^{2-p}
/// with the p < 2 right-hand side set to zero at a = b = 0.
inline SlackPair check_monotonicity_ineq(double p, const Vec& a, const Vec& b) {
    const double lhs = (vector_flux(b, p) - vector_flux(a, p)).dot(b - a);
    double rhs;
    if (p >= 2.0) {
        rhs = std::pow(2.0, 2.0 - p) * std::pow((b - a).norm(), p);
    } else {
        const double mags = a.norm() + b.norm();
        rhs = mags == 0.0 ? 0.0 : (p - 1.0) * (b - a).squaredNorm() / std::pow(mags, 2.0 - p);
    }
    return SlackPair::of(lhs - rhs, lhs, rhs);
}

/// Flux Lipschitz inequality:
///   p <= 2: |G(b)-G(a)| <= 2^{2-p} |b-a|^{p-1}
///   p >= 2: |G(b)-G(a)| <= (p-1)(|a|+|b|)^{p-2} |b-a|.
inline SlackPair check_lipschitz_ineq(double p, const Vec& a, const Vec& b) {
    const double lhs = (vector_flux(b, p) - vector_flux(a, p)).norm();
    double rhs;
    if (p <= 2.0) {
        rhs = std::pow(2.0, 2.0 - p) * std::pow((b - a).norm(), p - 1.0);
    } else {
        const double mags = a.norm() + b.norm();
        rhs = (p - 1.0) * (mags == 0.0 ? 0.0 : std::pow(mags, p - 2.0)) * (b - a).norm();
    }
    return SlackPair::of(rhs - lhs, lhs, rhs);
}

/// mu(A) = sup_{xi != 0} |A xi| |xi| / (A xi . xi), closed form
/// (l_min + l_max) / (2 sqrt(l_min l_max)). Validated against direct
/// maximization in the test suite before being trusted downstream.
inline double mu_matrix(const SymMatrix& A) {
    A.require_positive_definite();
    const auto [lmin, lmax] = A.eigen_range();
    return (lmin + lmax) / (2.0 * std::sqrt(lmin * lmax));
}

/// Direct maximization oracle for mu(A): best of `samples` random unit
/// directions, polished by projected gradient ascent on the ratio.
inline double mu_matrix_sampled(const SymMatrix& A, SplitMix64& rng, int samples = 100000) {
    A.require_positive_definite();
    const int n = A.dim();
    auto gauss = [&rng]() {
        const double u1 = std::max(rng.next_double(), 1e-300);
        const double u2 = rng.next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    auto ratio = [&](const Vec& xi) {
        const Vec Axi = A.M * xi;
        return Axi.norm() * xi.norm() / xi.dot(Axi);
    };

    Vec best = Vec::Zero(n);
    double best_val = 0.0;
    for (int i = 0; i < samples; ++i) {
        Vec xi(n);
        for (int k = 0; k < n; ++k) xi(k) = gauss();
        if (xi.norm() == 0.0) continue;
        const double r = ratio(xi);
        if (r > best_val) {
            best_val = r;
            best = xi;
        }
    }

    // polish: ascent on log(ratio), renormalized each step
    Vec xi = best.normalized();
    double step = 0.1;
    for (int it = 0; it < 400; ++it) {
        const Vec Axi = A.M * xi;
        const Vec grad = A.M * Axi / Axi.squaredNorm() + xi / xi.squaredNorm() -
                         2.0 * Axi / xi.dot(Axi);
        Vec trial = (xi + step * grad).normalized();
        if (ratio(trial) > ratio(xi)) {
            xi = trial;
            step *= 1.2;
        } else {
            step *= 0.5;
            if (step < 1e-14) break;
        }
    }
    return std::max(best_val, ratio(xi));
}

/// Cordes quantity delta = p - |p-2| mu(A); positivity is the monotonicity
/// assumption for the anisotropic operator.
inline double cordes_delta(double p, const SymMatrix& A) {
    return p - std::abs(p - 2.0) * mu_matrix(A);
}

struct AnisotropicSlacks {
    SlackPair monotonicity;
    SlackPair lipschitz;
};

/// Anisotropic analogues with explicit constants (lambda, Lambda the extreme
/// eigenvalues, delta the Cordes quantity):
///   p <= 2: (G_A(b)-G_A(a)).(b-a) >= (lambda delta / 2)|b-a|^2/(|b|+|a|)^{2-p}
///           |G_A(b)-G_A(a)| <= Lambda (3-p)/(p-1) 2^{p-1} |b-a|^{p-1}
///   p >= 2: (G_A(b)-G_A(a)).(b-a) >= (lambda delta / (m(p)(p-1))) |b-a|^p
///           |G_A(b)-G_A(a)| <= Lambda (p-1)(|a|+|b|)^{p-2} |b-a|
/// where G_A(v) = |v|^{p-2} A v and m(p) = max(8, 2^{p-1}). The 2^{p-1}
/// branch is forced for p > 4: the denominator 8(p-1) only covers
/// (|a|+|b|)^{p-2} <= 2^{p-3}(|a|^{p-2}+|b|^{p-2}) up to p = 4, and scalar
/// counterexamples violate the 8(p-1) form at p = 10.
inline AnisotropicSlacks check_anisotropic_ineq_cached(double p, const SymMatrix& A, const Vec& a,
                                                       const Vec& b, double lambda, double Lambda,
                                                       double delta) {
    if (!(delta > 0.0)) throw CordesViolated("check_anisotropic_ineq needs delta > 0");

    auto GA = [&](const Vec& v) -> Vec {
        const double n = v.norm();
        if (n == 0.0) return Vec::Zero(v.size());
        return std::pow(n, p - 2.0) * (A.M * v);
    };
    const Vec diff_flux = GA(b) - GA(a);
    const double mono_lhs = diff_flux.dot(b - a);
    const double lip_lhs = diff_flux.norm();
    const double d = (b - a).norm();
    const double mags = a.norm() + b.norm();

    double mono_rhs, lip_rhs;
    if (p <= 2.0) {
        mono_rhs = mags == 0.0 ? 0.0 : lambda * delta / 2.0 * d * d / std::pow(mags, 2.0 - p);
        lip_rhs = Lambda * (3.0 - p) / (p - 1.0) * std::pow(2.0, p - 1.0) * std::pow(d, p - 1.0);
    } else {
        const double mden = std::max(8.0, std::pow(2.0, p - 1.0));
        mono_rhs = lambda * delta / (mden * (p - 1.0)) * std::pow(d, p);
        lip_rhs = Lambda * (p - 1.0) * (mags == 0.0 ? 0.0 : std::pow(mags, p - 2.0)) * d;
    }

    AnisotropicSlacks out;
    out.monotonicity = SlackPair::of(mono_lhs - mono_rhs, mono_lhs, mono_rhs);
    out.lipschitz = SlackPair::of(lip_rhs - lip_lhs, lip_lhs, lip_rhs);
    return out;
}

inline AnisotropicSlacks check_anisotropic_ineq(double p, const SymMatrix& A, const Vec& a,
                                                const Vec& b) {
    const auto [lambda, Lambda] = A.eigen_range();
    return check_anisotropic_ineq_cached(p, A, a, b, lambda, Lambda, cordes_delta(p, A));
}

/// Random SPD matrix respecting the Cordes condition: eigenvalues in
/// [1, kappa_max(p)] with (1+kappa)/(2 sqrt(kappa)) held below p/|p-2| with
/// margin 0.9, conjugated by a random rotation.
inline SymMatrix random_cordes_matrix(double p, int N, SplitMix64& rng) {
    if (!(p > 1.0)) throw InfeasibleExponent("random_cordes_matrix needs p > 1");
    double kappa_max = std::numeric_limits<double>::infinity();
    if (p != 2.0) {
        const double mu_cap = 0.9 * p / std::abs(p - 2.0);
        if (mu_cap <= 1.0) {
            kappa_max = 1.0;  // only (near-)isotropic matrices stay feasible
        } else {
            const double t = mu_cap + std::sqrt(mu_cap * mu_cap - 1.0);
            kappa_max = t * t;
        }
    } else {
        kappa_max = 1e6;  // |p-2| = 0: any condition number is admissible
    }

    std::vector<double> eig(static_cast<std::size_t>(N));
    for (auto& e : eig) e = 1.0 + (kappa_max - 1.0) * rng.next_double();

    auto gauss = [&rng]() {
        const double u1 = std::max(rng.next_double(), 1e-300);
        const double u2 = rng.next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    Eigen::MatrixXd G(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) G(i, j) = gauss();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Q = qr.householderQ();

    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) D(i, i) = eig[static_cast<std::size_t>(i)];
    Eigen::MatrixXd M = Q * D * Q.transpose();
    M = 0.5 * (M + M.transpose());  // scrub rounding asymmetry
    return SymMatrix(std::move(M));
}

/// Random search for a monotonicity violation of the anisotropic flux map
/// (meaningful when the Cordes condition fails). Finding none is not a proof.
inline std::optional<std::pair<Vec, Vec>> search_monotonicity_violation(double p,
                                                                        const SymMatrix& A,
                                                                        SplitMix64& rng,
                                                                        int trials) {
    const int n = A.dim();
    for (int t = 0; t < trials; ++t) {
        Vec a(n), b(n);
        for (int k = 0; k < n; ++k) {
            a(k) = rng.uniform(-10.0, 10.0);
            b(k) = rng.uniform(-10.0, 10.0);
        }
        const double an = a.norm(), bn = b.norm();
        const Vec Ga = an == 0.0 ? Vec(Vec::Zero(n)) : Vec(std::pow(an, p - 2.0) * (A.M * a));
        const Vec Gb = bn == 0.0 ? Vec(Vec::Zero(n)) : Vec(std::pow(bn, p - 2.0) * (A.M * b));
        if ((Gb - Ga).dot(b - a) < -1e-10) return std::make_pair(a, b);
    }
    return std::nullopt;
}

struct IneqResult {
    std::string name;
    long samples = 0;
    double worst_rel_slack = std::numeric_limits<double>::infinity();
    double worst_abs_slack = std::numeric_limits<double>::infinity();
    long violations = 0;  // rel_slack < -1e-12
    std::string witness;  // first violating sample, if any
};

struct IneqSuiteReport {
    std::uint64_t seed = 0;
    long trials_per_ineq = 0;
    std::vector<IneqResult> results;

    long total_violations() const {
        long v = 0;
        for (const auto& r : results) v += r.violations;
        return v;
    }
};

/// Property suite over every algebraic inequality: random vectors with
/// components uniform in [-10,10], dimensions cycling {1,2,3,8}, random
/// Cordes matrices for the anisotropic pair. Deterministic given the seed.
inline IneqSuiteReport run_suite(std::uint64_t seed, long trials_per_ineq,
                                 const std::vector<double>& p_values = {1.1, 1.5, 2.0, 3.0, 4.0,
                                                                        10.0}) {
    if (trials_per_ineq < 1) throw Error("run_suite needs trials >= 1");
    IneqSuiteReport report;
    report.seed = seed;
    report.trials_per_ineq = trials_per_ineq;
    const int dims[4] = {1, 2, 3, 8};

    for (double p : p_values) {
        SplitMix64 rng(seed ^ static_cast<std::uint64_t>(p * 4096.0));
        IneqResult mono, lip, amono, alip;
        mono.name = "monotonicity[p=" + std::to_string(p) + "]";
        lip.name = "flux_lipschitz[p=" + std::to_string(p) + "]";
        amono.name = "anisotropic_monotonicity[p=" + std::to_string(p) + "]";
        alip.name = "anisotropic_lipschitz[p=" + std::to_string(p) + "]";

        auto track = [](IneqResult& res, const SlackPair& s, const Vec& a, const Vec& b) {
            ++res.samples;
            if (s.rel_slack < res.worst_rel_slack) {
                res.worst_rel_slack = s.rel_slack;
                res.worst_abs_slack = s.abs_slack;
            }
            if (s.rel_slack < -1e-12) {
                ++res.violations;
                if (res.witness.empty()) {
                    res.witness = "a=(";
                    for (int k = 0; k < a.size(); ++k)
                        res.witness += (k ? "," : "") + std::to_string(a(k));
                    res.witness += ") b=(";
                    for (int k = 0; k < b.size(); ++k)
                        res.witness += (k ? "," : "") + std::to_string(b(k));
                    res.witness += ")";
                }
            }
        };

        // per-dimension anisotropy refreshed every 64 visits; eigenvalues
        // cached alongside so the hot loop stays decomposition-free
        struct Cached {
            SymMatrix A;
            double lambda, Lambda, delta;
        };
        std::optional<Cached> A[4];
        for (long t = 0; t < trials_per_ineq; ++t) {
            const int di = static_cast<int>(t % 4);
            const int n = dims[di];
            Vec a(n), b(n);
            for (int k = 0; k < n; ++k) {
                a(k) = rng.uniform(-10.0, 10.0);
                b(k) = rng.uniform(-10.0, 10.0);
            }
            track(mono, check_monotonicity_ineq(p, a, b), a, b);
            track(lip, check_lipschitz_ineq(p, a, b), a, b);
            if ((t / 4) % 64 == 0 || !A[di]) {
                SymMatrix mat = random_cordes_matrix(p, n, rng);
                const auto [lo, hi] = mat.eigen_range();
                const double delta = cordes_delta(p, mat);
                A[di] = Cached{std::move(mat), lo, hi, delta};
            }
            const auto sl = check_anisotropic_ineq_cached(p, A[di]->A, a, b, A[di]->lambda,
                                                          A[di]->Lambda, A[di]->delta);
            track(amono, sl.monotonicity, a, b);
            track(alip, sl.lipschitz, a, b);
        }
        report.results.push_back(mono);
        report.results.push_back(lip);
        report.results.push_back(amono);
        report.results.push_back(alip);
    }
    return report;
}

}  // namespace pmaj
