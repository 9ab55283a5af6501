#pragma once

// Geometry of a criterion's estimating equation: statistical curvature and the
// reversal region {z : R₀(z) < 0}.

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "splinesel/criteria.hpp"
#include "splinesel/oracle.hpp"
#include "splinesel/spectrum.hpp"

namespace splinesel {

/// Natural parameter derivatives along λ.  On the null coordinates η̇ = η̈ = 0
/// and μ = +∞.
struct CriterionGeometry {
    double lambda = 0.0;
    Eigen::VectorXd eta_dot;   ///< −(p/(qλ)) a (c_q b^{1/q})^p
    Eigen::VectorXd eta_ddot;  ///< ∂η̇/∂λ
    Eigen::VectorXd mu;        ///< 1/(c_q b^{1/q})
    double gamma_sq = 0.0;
};

CriterionGeometry criterion_geometry(const Criterion& c, const DesignSpectrum& spec, double lambda);

/// Squared curvature from the closed-form spectral sums S_m = Σ a^m b^{(p−1)/q}:
///   ((p+q)²/(p c_q^{p−1})) (S₄/S₂² − S₃²/S₂³).
double curvature_sq(const Criterion& c, const DesignSpectrum& spec, double lambda);

/// Squared curvature det(M)/(η̇ᵀVη̇)³ from the Gram matrix of (η̇, η̈) under
/// V = diag(c_q^{−(p+1)} b^{−(p+1)/q} / p).
double curvature_via_matrix(const Criterion& c, const DesignSpectrum& spec, double lambda);

struct ReversalConstant {
    double beta = 0.0;
    double sum_a3 = 0.0;  ///< Σ a³ b^{−2/q}
    double sum_a2 = 0.0;  ///< Σ a² b^{−2/q}
};

/// β = −(1/λ₀)[2 − (1 + p/q) Σa³b^{−2/q} / Σa²b^{−2/q}].
ReversalConstant reversal_constant(const Criterion& c, const DesignSpectrum& spec, double lambda0);

/// R₀(z) = l̈(u) − β l̇(u) at λ₀ with u = |z|^{2/q}.
double reversal_stat(const Criterion& c, const DesignSpectrum& spec, double lambda0, const Eigen::VectorXd& z);

struct ReversalSummary {
    double lambda0 = 0.0;
    double beta = 0.0;
    double sum_a3 = 0.0;
    double sum_a2 = 0.0;
    double M = 0.0;
    double V = 0.0;
    double T_n = 0.0;          ///< −M/√V, the standardized position of R₀ = 0
    double prob_normal = 0.0;  ///< Φ(T_n)
    double prob_mc = 0.0;      ///< NaN until filled by reversal_prob_mc
    double mc_se = 0.0;
};

/// Mean M and variance V of λ₀²·R₀ and the normal approximation of P(R₀ < 0).
ReversalSummary reversal_moments(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                 double lambda0);

struct ReversalProbability {
    double prob = 0.0;
    double se = 0.0;
};

/// Fraction of draws z = g + ε with R₀(z) < 0, ε from NormalStream(seed, n, r).
ReversalProbability reversal_prob_mc(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                     double lambda0, std::size_t replicates, std::uint64_t seed,
                                     unsigned workers = 0);

std::string curvature_csv_header();
std::string curvature_csv_row(std::size_t n, const std::string& criterion, double lambda0, double df0,
                              double gamma_sq);

std::string reversal_csv_header();
std::string reversal_csv_row(std::size_t n, const std::string& criterion, const ReversalSummary& s);

}  // namespace splinesel
