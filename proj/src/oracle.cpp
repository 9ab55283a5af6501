#include "splinesel/oracle.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "splinesel/error.hpp"
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

OracleLambda to_oracle(const DesignSpectrum& spec, const WindowMinimum& m) {
    return {m.lambda, df(spec, m.lambda), m.boundary};
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

TruthSpectrum make_truth(const DesignSpectrum& spec, Eigen::VectorXd f, double sigma) {
    if (static_cast<std::size_t>(f.size()) != spec.n) throw DomainError("make_truth: f has the wrong length");
    if (!f.allFinite()) throw DomainError("make_truth: f must be finite");
    TruthSpectrum t;
    t.g = rotate(spec, f, sigma);
    t.f = std::move(f);
    t.sigma = sigma;
    return t;
}

double risk(const DesignSpectrum& spec, const TruthSpectrum& truth, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("risk: lambda must be >= 0");
    double total = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double gi = truth.g[static_cast<Eigen::Index>(i)];
        total += b * b * gi * gi + a * a;
    }
    return total;
}

OracleLambda ideal_lambda(const DesignSpectrum& spec, const TruthSpectrum& truth, const SearchWindow& window) {
    return to_oracle(spec, minimize_on_window(window, [&](double l) { return risk(spec, truth, l); }));
}

OracleLambda ideal_lambda(const DesignSpectrum& spec, const TruthSpectrum& truth) {
    return ideal_lambda(spec, truth, make_search_window(spec));
}

Eigen::VectorXd expected_transform(const Criterion& c, const TruthSpectrum& truth) {
    Eigen::VectorXd eu(truth.g.size());
    for (Eigen::Index i = 0; i < eu.size(); ++i) {
        const double gi = truth.g[i];
        eu[i] = c.q == 1.0 ? 1.0 + gi * gi : abs_moment(gi, 1.0 / c.q);
    }
    return eu;
}

double expected_loss(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth, double lambda) {
    return loss_at(c, spec, lambda, expected_transform(c, truth));
}

OracleLambda central_lambda(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                            const SearchWindow& window) {
    const Eigen::VectorXd eu = expected_transform(c, truth);
    return to_oracle(spec, minimize_on_window(window, [&](double l) { return loss_at(c, spec, l, eu); }));
}

OracleLambda central_lambda(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth) {
    return central_lambda(c, spec, truth, make_search_window(spec));
}

double normal_equation_residual(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                double lambda) {
    if (!(lambda > 0.0)) throw DomainError("normal_equation_residual: lambda must be positive");
    const Eigen::VectorXd eu = expected_transform(c, truth);
    double lhs = 0.0, rhs_first = 0.0, rhs_second = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double bpq = std::pow(b, c.p / c.q);
        const double bp1q = std::pow(b, (c.p - 1.0) / c.q);
        lhs += a * bpq * (c.cq * eu[static_cast<Eigen::Index>(i)] - 1.0);
        rhs_first += a * bp1q;
        rhs_second += a * bpq;
    }
    return (lhs - (rhs_first - rhs_second)) / rhs_first;
}

double q_function(const Criterion& c, const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& u) {
    if (!(lambda > 0.0)) throw DomainError("q_function: lambda must be positive");
    const double pq = c.p / c.q;
    double total = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double centred = c.cq * std::pow(b, 1.0 / c.q) * u[static_cast<Eigen::Index>(i)] - 1.0;
        total += a * std::pow(b, (c.p - 1.0) / c.q) * (a / c.q + ((1.0 + pq) * a - 2.0) * centred);
    }
    return total;
}

DecompositionReport decomposition_mc(const Criterion& c, const DesignSpectrum& spec, const TruthSpectrum& truth,
                                     std::size_t replicates, std::uint64_t seed, unsigned workers) {
    if (replicates < 100) throw DomainError("decomposition_mc: need at least 100 replicates");
    const SearchWindow window = make_search_window(spec);
    const OracleLambda ideal = ideal_lambda(spec, truth, window);
    const OracleLambda central = central_lambda(c, spec, truth, window);
    const double risk0 = risk(spec, truth, ideal.lambda);

    const Selector selector(c, spec, window);
    const SmootherWeights wc = weights(spec, central.lambda);
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n);

    std::vector<double> cov(replicates), var(replicates), extra(replicates);
    parallel_for(
        replicates,
        [&](std::size_t r) {
            NormalStream stream(seed, spec.n, r);
            const Eigen::VectorXd z = truth.g + stream.vector(n);
            const SelectionResult sel = selector(z);
            const SmootherWeights wh = weights(spec, sel.lambda_hat);
            const Eigen::ArrayXd ghat_c = wc.a.array() * z.array();
            const Eigen::ArrayXd ghat = wh.a.array() * z.array();
            const Eigen::ArrayXd diff = ghat - ghat_c;
            cov[r] = ((ghat_c - truth.g.array()) * diff).sum();
            var[r] = diff.square().sum();
            extra[r] = (ghat - truth.g.array()).square().sum() - risk0;
        },
        workers);

    DecompositionReport rep;
    rep.lambda_0 = ideal.lambda;
    rep.df_0 = ideal.df;
    rep.lambda_c = central.lambda;
    rep.df_c = central.df;
    rep.bias_term = risk(spec, truth, central.lambda) - risk0;
    rep.covariance_term = mean(cov);
    rep.variability_term = mean(var);
    rep.extra_risk = mean(extra);
    rep.mc_replicates = replicates;
    rep.mc_standard_errors = {standard_error(cov), standard_error(var), standard_error(extra)};
    return rep;
}

std::string to_json(const DecompositionReport& r) {
    nlohmann::ordered_json j;
    j["lambda_0"] = r.lambda_0;
    j["df_0"] = r.df_0;
    j["lambda_c"] = r.lambda_c;
    j["df_c"] = r.df_c;
    j["bias_term"] = r.bias_term;
    j["covariance_term"] = r.covariance_term;
    j["variability_term"] = r.variability_term;
    j["extra_risk"] = r.extra_risk;
    j["mc_replicates"] = r.mc_replicates;
    j["mc_standard_errors"] = r.mc_standard_errors;
    return j.dump();
}

DecompositionApprox decomposition_approx(const Criterion& c, const DesignSpectrum& spec,
                                         const TruthSpectrum& truth) {
    const OracleLambda central = central_lambda(c, spec, truth);
    if (central.boundary != Boundary::none)
        throw DomainError("decomposition_approx: central lambda lies on the search-window boundary");
    const double lambda = central.lambda;
    const double pq = c.p / c.q;

    double q_value = 0.0, q_scale = 0.0;
    double sum_bias = 0.0, sum_var = 0.0, sum_third = 0.0, sum_cov = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double gi = truth.g[static_cast<Eigen::Index>(i)];
        const MomentSet m = moment_set(gi, c.q);
        const double bp1q = std::pow(b, (c.p - 1.0) / c.q);
        const double bpq = std::pow(b, pq);
        const double first = a / c.q;
        const double second = ((1.0 + pq) * a - 2.0) * (c.cq * std::pow(b, 1.0 / c.q) * m.m1 - 1.0);
        q_value += a * bp1q * (first + second);
        q_scale += std::abs(a * bp1q * first) + std::abs(a * bp1q * second);

        const double a2 = a * a;
        sum_bias += a2 * b * b * (gi * gi + 1.0);
        sum_var += a2 * bpq * bpq * m.var_w;
        sum_third += a2 * a2 * b * b * bpq * bpq * m.third_mixed;
        sum_cov += a2 * b * bpq * (a * m.cov_z2_w - gi * m.cov_z_w);
    }
    if (!(std::abs(q_value) > 1e-12 * q_scale))
        throw NumericError("decomposition_approx: Q is numerically zero at lambda_c");

    DecompositionApprox out;
    out.lambda_c = lambda;
    out.q_value = q_value;
    out.variability_approx = c.cq * c.cq / (q_value * q_value) * (sum_bias * sum_var + sum_third);
    out.covariance_approx = c.cq / q_value * sum_cov;
    return out;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("log_log_slope: need two or more points");
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log_log_slope: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = mean(lx), my = mean(ly);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

RateProbe rate_probe(const Criterion& c, const DesignFactory& design, const std::vector<std::size_t>& n_list,
                     const CurveFunction& truth, double sigma, SpectrumCache& cache) {
    if (n_list.size() < 4) throw DomainError("rate_probe: need at least four sample sizes");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw DomainError("rate_probe: sample sizes must increase");

    RateProbe probe;
    std::vector<double> ns, lambdas, dfs;
    for (std::size_t n : n_list) {
        const auto spec = cache.get(design(n));
        const TruthSpectrum t = make_truth(*spec, truth(spec->x), sigma);
        const OracleLambda central = central_lambda(c, *spec, t);
        probe.rows.push_back({n, central.lambda, central.df, central.boundary});
        if (central.boundary != Boundary::none) {
            probe.excluded.push_back(n);
            continue;
        }
        ns.push_back(static_cast<double>(n));
        lambdas.push_back(central.lambda);
        dfs.push_back(central.df);
    }
    if (ns.size() < 2) throw NumericError("rate_probe: fewer than two interior central lambdas");
    probe.slope_log_lambda = log_log_slope(ns, lambdas);
    probe.slope_log_df = log_log_slope(ns, dfs);
    return probe;
}

}  // namespace splinesel
