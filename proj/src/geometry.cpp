#include "splinesel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "splinesel/error.hpp"
#include "splinesel/format.hpp"
#include "splinesel/parallel.hpp"
#include "splinesel/rng.hpp"
#include "splinesel/specfun.hpp"

namespace splinesel {

namespace {

struct Shrink {
    double a;
    double b;
};

Shrink shrink(double lambda, double k) {
    const double lk = lambda * k;
    return {1.0 / (1.0 + lk), lk / (1.0 + lk)};
}

void require_positive(double lambda, const char* what) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError(std::string(what) + ": lambda must be positive and finite");
}

}  // namespace

CriterionGeometry criterion_geometry(const Criterion& c, const DesignSpectrum& spec, double lambda) {
    require_positive(lambda, "criterion_geometry");
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n);
    const double pq = c.p / c.q;
    CriterionGeometry geo;
    geo.lambda = lambda;
    geo.eta_dot.setZero(n);
    geo.eta_ddot.setZero(n);
    geo.mu.setConstant(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index i = static_cast<Eigen::Index>(spec.null_dim); i < n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double t = c.cq * std::pow(b, 1.0 / c.q);
        const double h = pq / lambda * a * std::pow(t, c.p);
        geo.eta_dot[i] = -h;
        geo.eta_ddot[i] = -h / lambda * ((1.0 + pq) * a - 2.0);
        geo.mu[i] = 1.0 / t;
    }
    geo.gamma_sq = curvature_sq(c, spec, lambda);
    return geo;
}

double curvature_sq(const Criterion& c, const DesignSpectrum& spec, double lambda) {
    require_positive(lambda, "curvature_sq");
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double w = std::pow(b, (c.p - 1.0) / c.q) * a * a;
        s2 += w;
        s3 += w * a;
        s4 += w * a * a;
    }
    const double factor = (c.p + c.q) * (c.p + c.q) / (c.p * std::pow(c.cq, c.p - 1.0));
    const double value = factor * (s4 / (s2 * s2) - s3 * s3 / (s2 * s2 * s2));
    return std::max(0.0, value);
}

double curvature_via_matrix(const Criterion& c, const DesignSpectrum& spec, double lambda) {
    require_positive(lambda, "curvature_via_matrix");
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n);
    const double pq = c.p / c.q;
    Eigen::Matrix<double, Eigen::Dynamic, 2> E = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(n, 2);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = static_cast<Eigen::Index>(spec.null_dim); i < n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double h = pq / lambda * a * std::pow(c.cq * std::pow(b, 1.0 / c.q), c.p);
        E(i, 0) = -h;
        E(i, 1) = -h / lambda * ((1.0 + pq) * a - 2.0);
        v[i] = std::pow(c.cq, -(c.p + 1.0)) * std::pow(b, -(c.p + 1.0) / c.q) / c.p;
    }
    const Eigen::Matrix2d M = E.transpose() * v.asDiagonal() * E;
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    return std::max(0.0, det / (M(0, 0) * M(0, 0) * M(0, 0)));
}

ReversalConstant reversal_constant(const Criterion& c, const DesignSpectrum& spec, double lambda0) {
    require_positive(lambda0, "reversal_constant");
    ReversalConstant rc;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda0, spec.k[i]);
        const double w = a * a * std::pow(b, -2.0 / c.q);
        rc.sum_a2 += w;
        rc.sum_a3 += w * a;
    }
    rc.beta = -(1.0 / lambda0) * (2.0 - (1.0 + c.p / c.q) * rc.sum_a3 / rc.sum_a2);
    return rc;
}

double reversal_stat(const Criterion& c, const DesignSpectrum& spec, double lambda0, const Eigen::VectorXd& z) {
    const ReversalConstant rc = reversal_constant(c, spec, lambda0);
    const LossDerivatives d = loss_derivs(c, spec, lambda0, transform(c, z));
    return d.second - rc.beta * d.first;
}

ReversalSummary reversal_moments(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                 double lambda0) {
    const ReversalConstant rc = reversal_constant(c, spec, lambda0);
    const double ratio = rc.sum_a3 / rc.sum_a2;
    double mean_first = 0.0, mean_second = 0.0, var_sum = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda0, spec.k[i]);
        const double gi = truth.g[static_cast<Eigen::Index>(i)];
        const MomentSet m = moment_set(gi, c.q);
        const double bp1q = std::pow(b, (c.p - 1.0) / c.q);
        const double b2pq = std::pow(b, 2.0 * c.p / c.q);
        mean_first += a * a * bp1q;
        mean_second += a * bp1q * (a - ratio) * (c.cq * std::pow(b, 1.0 / c.q) * m.m1 - 1.0);
        var_sum += a * a * b2pq * (a - ratio) * (a - ratio) * m.var_w;
    }
    const double p = c.p, q = c.q;
    ReversalSummary s;
    s.lambda0 = lambda0;
    s.beta = rc.beta;
    s.sum_a3 = rc.sum_a3;
    s.sum_a2 = rc.sum_a2;
    s.M = p / (q * q) * (p + q) * std::pow(c.cq, p - 1.0) * (mean_first / (p + q) + mean_second);
    s.V = p * p / (q * q * q * q) * (p + q) * (p + q) * std::pow(c.cq, 2.0 * p) * var_sum;
    if (!(s.V > 0.0)) throw NumericError("reversal_moments: variance of R0 is not positive");
    s.T_n = -s.M / std::sqrt(s.V);
    s.prob_normal = normal_cdf(s.T_n);
    s.prob_mc = std::numeric_limits<double>::quiet_NaN();
    s.mc_se = std::numeric_limits<double>::quiet_NaN();
    return s;
}

ReversalProbability reversal_prob_mc(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                     double lambda0, std::size_t replicates, std::uint64_t seed,
                                     unsigned workers) {
    if (replicates < 1000) throw DomainError("reversal_prob_mc: need at least 1000 replicates");
    const ReversalConstant rc = reversal_constant(c, spec, lambda0);
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n);
    std::vector<unsigned char> hit(replicates, 0);
    parallel_for(
        replicates,
        [&](std::size_t r) {
            NormalStream stream(seed, spec.n, r);
            const Eigen::VectorXd z = truth.g + stream.vector(n);
            const LossDerivatives d = loss_derivs(c, spec, lambda0, transform(c, z));
            hit[r] = (d.second - rc.beta * d.first) < 0.0 ? 1 : 0;
        },
        workers);
    std::size_t count = 0;
    for (unsigned char h : hit) count += h;
    const double prob = static_cast<double>(count) / static_cast<double>(replicates);
    return {prob, std::sqrt(prob * (1.0 - prob) / static_cast<double>(replicates))};
}

std::string curvature_csv_header() { return "n,criterion,lambda_0,df_0,gamma_sq"; }

std::string curvature_csv_row(std::size_t n, const std::string& criterion, double lambda0, double df0,
                              double gamma_sq) {
    return std::to_string(n) + "," + criterion + "," + format_double(lambda0) + "," + format_double(df0) + "," +
           format_double(gamma_sq);
}

std::string reversal_csv_header() {
    return "n,criterion,lambda_0,beta,sum_a3_b,sum_a2_b,M,V,T_n,prob_normal,prob_mc,mc_se";
}

std::string reversal_csv_row(std::size_t n, const std::string& criterion, const ReversalSummary& s) {
    std::string row = std::to_string(n) + "," + criterion;
    for (double v : {s.lambda0, s.beta, s.sum_a3, s.sum_a2, s.M, s.V, s.T_n, s.prob_normal, s.prob_mc, s.mc_se})
        row += "," + format_double(v);
    return row;
}

}  // namespace splinesel
