#pragma once

// Quantities that need the true curve: risk, ideal and central smoothing
// parameters, and the decomposition of a criterion's extra risk
//
//   E‖ĝ_λ̂ − g‖² − E‖ĝ_λ₀ − g‖² = bias + 2·covariance + variability.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "splinesel/criteria.hpp"
#include "splinesel/optimize.hpp"
#include "splinesel/spectrum.hpp"

namespace splinesel {

struct TruthSpectrum {
    Eigen::VectorXd f;  ///< true curve at the design points
    double sigma = 1.0;
    Eigen::VectorXd g;  ///< Uᵀ f / σ
};

TruthSpectrum make_truth(const DesignSpectrum& spec, Eigen::VectorXd f, double sigma);

/// E‖ĝ_λ − g‖² = Σ_i (b_i² g_i² + a_i²) over all n coordinates.
double risk(const DesignSpectrum& spec, const TruthSpectrum& truth, double lambda);

struct OracleLambda {
    double lambda = 0.0;
    double df = 0.0;
    Boundary boundary = Boundary::none;
};

/// Risk minimizer λ₀ over the selection search window.
OracleLambda ideal_lambda(const DesignSpectrum& spec, const TruthSpectrum& truth);
OracleLambda ideal_lambda(const DesignSpectrum& spec, const TruthSpectrum& truth, const SearchWindow& window);

/// E|z_i|^{2/q} for every coordinate.
Eigen::VectorXd expected_transform(const Criterion& c, const TruthSpectrum& truth);

/// Expected criterion loss E l_λ(|z|^{2/q}); the loss is linear in u, so this
/// is the loss evaluated at E|z|^{2/q}.
double expected_loss(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth, double lambda);

/// Minimizer λ_c of the expected loss.
OracleLambda central_lambda(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth);
OracleLambda central_lambda(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                            const SearchWindow& window);

/// Residual of the expected normal equation
///   Σ a b^{p/q}(c_q E|z|^{2/q} − 1) − [Σ a b^{(p−1)/q} − Σ a b^{p/q}]
/// divided by Σ a b^{(p−1)/q}.  Zero at an interior λ_c.
double normal_equation_residual(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                double lambda);

/// Q_λ(u) = Σ a b^{(p−1)/q} { a/q + [(1 + p/q) a − 2](c_q b^{1/q} u − 1) } over penalized coordinates.
double q_function(const Criterion& c, const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& u);

struct DecompositionReport {
    double lambda_0 = 0.0;
    double df_0 = 0.0;
    double lambda_c = 0.0;
    double df_c = 0.0;
    double bias_term = 0.0;         ///< risk(λ_c) − risk(λ₀)
    double covariance_term = 0.0;   ///< E (ĝ_λc − g)ᵀ(ĝ_λ̂ − ĝ_λc)
    double variability_term = 0.0;  ///< E ‖ĝ_λ̂ − ĝ_λc‖²
    double extra_risk = 0.0;        ///< E ‖ĝ_λ̂ − g‖² − risk(λ₀)
    std::size_t mc_replicates = 0;
    /// Standard errors of covariance_term, variability_term and extra_risk.
    std::array<double, 3> mc_standard_errors{};
};

/// Monte Carlo estimate of the decomposition.  Replicate r draws
/// z = g + ε with ε from NormalStream(seed, n, r), so every criterion run with
/// the same seed sees the same data.  Requires replicates >= 100.
DecompositionReport decomposition_mc(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                     std::size_t replicates, std::uint64_t seed, unsigned workers = 0);

/// JSON object with the report's field names.
std::string to_json(const DecompositionReport& report);

struct DecompositionApprox {
    double lambda_c = 0.0;
    double q_value = 0.0;  ///< Q_λc(E|z|^{2/q})
    double variability_approx = 0.0;
    double covariance_approx = 0.0;
};

/// First-order approximations of the variability and covariance terms at λ_c.
DecompositionApprox decomposition_approx(const Criterion& c, const DesignSpectrum& spec,
                                         const TruthSpectrum& truth);

struct RateRow {
    std::size_t n = 0;
    double lambda_c = 0.0;
    double df_c = 0.0;
    Boundary boundary = Boundary::none;
};

struct RateProbe {
    std::vector<RateRow> rows;
    double slope_log_lambda = 0.0;  ///< least-squares slope of log λ_c on log n
    double slope_log_df = 0.0;      ///< least-squares slope of log df_c on log n
    std::vector<std::size_t> excluded;  ///< n values dropped for boundary minimizers
};

using DesignFactory = std::function<DesignSpec(std::size_t n)>;
using CurveFunction = std::function<Eigen::VectorXd(const std::vector<double>& x)>;

RateProbe rate_probe(const Criterion& c, const DesignFactory& design, const std::vector<std::size_t>& n_list,
                     const CurveFunction& truth, double sigma, SpectrumCache& cache);

/// Least-squares slope of log y on log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace splinesel
