#pragma once

// The (p, q) family of smoothing-parameter criteria.
//
//   l_λ(u) = Σ_{k_i>0} [ t_i^p u_i − p/(p−1) (t_i^{p−1} − 1) ]     p > 1
//   l_λ(u) = Σ_{k_i>0} [ t_i u_i − (1/q) log b_i ]                 p = 1
//
// with t_i = c_q b_i^{1/q} and u = |z|^{2/q}.  Only penalized coordinates enter.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

#include "splinesel/optimize.hpp"
#include "splinesel/spectrum.hpp"

namespace splinesel {

struct Criterion {
    double p = 2.0;
    double q = 1.0;
    double cq = 1.0;
    std::string name;

    /// Validates p, q >= 1 and caches c_q.  An empty name becomes "pq(p,q)".
    static Criterion make(double p, double q, std::string name = {});
};

Criterion cp();
Criterion gml();
Criterion ee();

/// "cp", "gml", "ee" or "pq(p,q)" (case-insensitive).  Throws ConfigError.
Criterion criterion_from_id(std::string_view id);

/// u_i = |z_i|^{2/q}.
Eigen::VectorXd transform(const Criterion& c, const Eigen::VectorXd& z);

double loss(const Criterion& c, const SmootherWeights& w, const Eigen::VectorXd& u);

/// Same value as loss(c, weights(spec, λ), u) without building the weights.
double loss_at(const Criterion& c, const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& u);

struct LossDerivatives {
    double first = 0.0;   ///< l̇ = dl/dλ
    double second = 0.0;  ///< l̈ = d²l/dλ²
};

LossDerivatives loss_derivs(const Criterion& c, const DesignSpectrum& spec, double lambda,
                            const Eigen::VectorXd& u);

struct SelectionResult {
    double lambda_hat = 0.0;
    double df_hat = 0.0;
    double loss = 0.0;
    Boundary at_boundary = Boundary::none;
};

/// Selection for one criterion on one spectrum.  The coarse pass is a single
/// matrix-vector product against a precomputed coefficient table, so reusing a
/// Selector across replicates is much cheaper than calling select().  Holds a
/// reference to `spec`, which must outlive it.
class Selector {
public:
    Selector(Criterion c, const DesignSpectrum& spec, const SearchWindow& window);
    Selector(Criterion c, const DesignSpectrum& spec);

    /// Select from spectral coordinates z.
    SelectionResult operator()(const Eigen::VectorXd& z) const;
    /// Select from transformed data u = |z|^{2/q}.
    SelectionResult from_transformed(const Eigen::VectorXd& u) const;

    const Criterion& criterion() const { return c_; }
    const SearchWindow& window() const { return window_; }

private:
    Criterion c_;
    const DesignSpectrum& spec_;
    SearchWindow window_;
    Eigen::MatrixXd coef_;     ///< candidates × penalized coordinates
    Eigen::VectorXd offset_;   ///< per candidate
};

SelectionResult select(const Criterion& c, const DesignSpectrum& spec, const Eigen::VectorXd& z);

/// Mallows-type statistic ‖y − f̂_λ‖² + 2ωσ² df − nσ².  At ω = 1 this is the
/// unbiased risk estimate; the −nσ² offset does not move its minimizer.
double cp_statistic(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y, double sigma,
                    double omega = 1.0);

/// ‖y − f̂_λ‖² / (1 − ω df/n)².  Requires ω df < n.
double gcv_statistic(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y, double omega = 1.0);

struct ClassicStatistics {
    double cp = 0.0;
    double gcv = 0.0;
};

ClassicStatistics classic_statistics(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y,
                                     double sigma, double omega = 1.0);

/// Variance estimate from the M+2 highest spectral coordinates of y,
/// Σ (Uᵀy)_i² / (M − 2).  Requires 5 <= M <= n − 5.
double sigma_estimate(const DesignSpectrum& spec, const Eigen::VectorXd& y, std::size_t M);

/// Default M for sigma_estimate: max(20, round(n/10)).
std::size_t default_sigma_terms(std::size_t n);

}  // namespace splinesel
