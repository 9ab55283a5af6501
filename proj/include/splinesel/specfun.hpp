#pragma once

// Special functions and moments of powers of noncentral Gaussians.
//
// Throughout, Z ~ Normal(g, 1) and w = |Z|^{2/q}.  Powers other than Z itself
// are taken on |Z| so that fractional exponents stay real.

#include <functional>
#include <vector>

namespace splinesel {

struct LogGammaBeta {
    double log_gamma;  ///< log Γ(x)
    double beta;       ///< B(x, y) = Γ(x)Γ(y)/Γ(x+y)
};

/// log Γ(x) and the beta function B(x, y); both arguments must be positive.
LogGammaBeta log_gamma_and_beta(double x, double y);

/// Confluent hypergeometric function M(a, b, z) (Kummer's series).
///
/// Negative z goes through Kummer's transformation M(a,b,z) = e^z M(b-a,b,-z)
/// so the summed series has only positive terms.  Large |z| switches to the
/// asymptotic expansion.  Throws NumericError if the series does not settle
/// within 500 terms.
double kummer_m(double a, double b, double z);

/// e^{-x} M(a, b, x) for x >= 0.  Finite for arguments where M itself overflows.
double kummer_m_scaled(double a, double b, double x);

/// Normalizing constant c_q = √π / (2^{1/q} Γ(1/2 + 1/q)), q >= 1.
double c_q(double q);

/// E|Z|^{2s} for Z ~ Normal(g, 1), s > -1/2.
double abs_moment(double g, double s);

/// First and second derivatives of abs_moment with respect to g.
struct MomentDerivatives {
    double value;
    double d1;
    double d2;
};
MomentDerivatives abs_moment_derivatives(double g, double s);

struct MomentSet {
    double g = 0.0;
    double q = 1.0;
    double m1 = 0.0;           ///< E w
    double m2 = 0.0;           ///< E w²
    double var_w = 0.0;        ///< m2 - m1²
    double cov_z2_w = 0.0;     ///< cov(Z², w)
    double cov_z_w = 0.0;      ///< cov(Z, w)
    double third_mixed = 0.0;  ///< E[(Z² - g² - 1)(w - m1)²]
};

/// All moments of w needed by the variability approximations.  q = 1 uses the
/// exact polynomial forms; other q use derivative identities of the Kummer
/// representation (E[(Z-g)h(Z)] = d/dg E h, E[((Z-g)²-1)h(Z)] = d²/dg² E h).
MomentSet moment_set(double g, double q);

/// Leading-order approximation of Σ_{i>2} a_i^r b_i^s for equispaced designs on
/// [0, 1]:  (1/4π) B(r - 1/4, s + 1/4) (n/λ)^{1/4}.
double asym_sum(double r, double s, double n, double lambda);

/// Standard normal distribution function, via erfc.
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

/// Gauss–Hermite rule for the weight e^{-x²}.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss–Hermite rule computed by Newton iteration on H_n.
QuadratureRule gauss_hermite(int n);

/// E h(Z) for Z ~ Normal(mean, 1) by Gauss–Hermite quadrature.
double gaussian_expectation(const QuadratureRule& rule, double mean,
                            const std::function<double(double)>& h);

}  // namespace splinesel
