#include "splinesel/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "splinesel/error.hpp"

namespace splinesel {

namespace {

constexpr int kSeriesTermCap = 500;
constexpr double kSeriesRelTol = 1e-16;
// Beyond this argument the scaled Kummer function uses its asymptotic expansion.
constexpr double kAsymptoticThreshold = 60.0;

bool is_nonpositive_integer(double a) { return a <= 0.0 && a == std::floor(a); }

// Plain Kummer series. Convergence: three consecutive terms below the relative
// tolerance, or exact termination when a is a nonpositive integer.
double kummer_series(double a, double b, double z) {
    double term = 1.0;
    double sum = 1.0;
    int quiet = 0;
    for (int k = 0; k < kSeriesTermCap; ++k) {
        term *= (a + k) * z / ((b + k) * (k + 1));
        sum += term;
        if (term == 0.0) return sum;
        if (std::abs(term) < kSeriesRelTol * std::abs(sum)) {
            if (++quiet == 3) return sum;
        } else {
            quiet = 0;
        }
    }
    throw NumericError("kummer_m: series did not converge after " + std::to_string(kSeriesTermCap) +
                       " terms (a=" + std::to_string(a) + ", b=" + std::to_string(b) +
                       ", z=" + std::to_string(z) + ")");
}

// e^{-x} M(a,b,x) ≈ Γ(b)/Γ(a) x^{a-b} Σ_k (b-a)_k (1-a)_k / (k! x^k), x → +∞.
double kummer_scaled_asymptotic(double a, double b, double x) {
    double term = 1.0;
    double sum = 1.0;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kSeriesTermCap; ++k) {
        term *= (b - a + k) * (1.0 - a + k) / ((k + 1) * x);
        if (term == 0.0) break;
        if (std::abs(term) > std::abs(previous)) break;  // divergent tail
        sum += term;
        previous = term;
        if (std::abs(term) < kSeriesRelTol * std::abs(sum)) break;
    }
    const double log_prefactor = std::lgamma(b) - std::lgamma(a) + (a - b) * std::log(x);
    const double sign = std::tgamma(a) < 0.0 ? -1.0 : 1.0;
    return sign * std::exp(log_prefactor) * sum;
}

void check_b(double b) {
    if (is_nonpositive_integer(b))
        throw DomainError("kummer_m: b must not be a nonpositive integer, got " + std::to_string(b));
}

}  // namespace

LogGammaBeta log_gamma_and_beta(double x, double y) {
    if (!(x > 0.0) || !(y > 0.0))
        throw DomainError("log_gamma_and_beta: arguments must be positive");
    const double lx = std::lgamma(x);
    const double beta = std::exp(lx + std::lgamma(y) - std::lgamma(x + y));
    return {lx, beta};
}

double kummer_m_scaled(double a, double b, double x) {
    check_b(b);
    if (x < 0.0) throw DomainError("kummer_m_scaled: x must be nonnegative");
    if (a == 0.0) return std::exp(-x);
    if (is_nonpositive_integer(a) || x <= kAsymptoticThreshold)
        return std::exp(-x) * kummer_series(a, b, x);
    return kummer_scaled_asymptotic(a, b, x);
}

double kummer_m(double a, double b, double z) {
    check_b(b);
    if (a == 0.0) return 1.0;
    if (is_nonpositive_integer(a)) return kummer_series(a, b, z);
    if (z < 0.0) return kummer_m_scaled(b - a, b, -z);
    if (z <= kAsymptoticThreshold) return kummer_series(a, b, z);
    return std::exp(z) * kummer_scaled_asymptotic(a, b, z);
}

double c_q(double q) {
    if (!(q >= 1.0)) throw DomainError("c_q: q must be >= 1");
    return std::sqrt(std::numbers::pi) / (std::pow(2.0, 1.0 / q) * std::tgamma(0.5 + 1.0 / q));
}

MomentDerivatives abs_moment_derivatives(double g, double s) {
    if (!(s > -0.5)) throw DomainError("abs_moment: s must exceed -1/2");
    if (s == 0.0) return {1.0, 0.0, 0.0};
    const double x = 0.5 * g * g;
    const double scale = std::pow(2.0, s) * std::tgamma(s + 0.5) / std::sqrt(std::numbers::pi);
    const double s0 = kummer_m_scaled(0.5 + s, 0.5, x);
    const double s1 = kummer_m_scaled(0.5 + s, 1.5, x);
    const double s2 = kummer_m_scaled(0.5 + s, 2.5, x);
    return {scale * s0,
            2.0 * s * g * scale * s1,
            2.0 * s * scale * (s1 - (2.0 * (1.0 - s) / 3.0) * g * g * s2)};
}

double abs_moment(double g, double s) {
    if (!(s > -0.5)) throw DomainError("abs_moment: s must exceed -1/2");
    if (s == 0.0) return 1.0;
    const double scale = std::pow(2.0, s) * std::tgamma(s + 0.5) / std::sqrt(std::numbers::pi);
    return scale * kummer_m_scaled(0.5 + s, 0.5, 0.5 * g * g);
}

MomentSet moment_set(double g, double q) {
    if (!(q >= 1.0)) throw DomainError("moment_set: q must be >= 1");
    MomentSet m;
    m.g = g;
    m.q = q;
    const double g2 = g * g;
    if (q == 1.0) {
        m.m1 = 1.0 + g2;
        m.m2 = g2 * g2 + 6.0 * g2 + 3.0;
        m.var_w = 2.0 + 4.0 * g2;
        m.cov_z2_w = m.var_w;
        m.cov_z_w = 2.0 * g;
        m.third_mixed = 8.0 + 24.0 * g2;
        return m;
    }
    const double s = 1.0 / q;
    const MomentDerivatives w = abs_moment_derivatives(g, s);
    const MomentDerivatives w2 = abs_moment_derivatives(g, 2.0 * s);
    m.m1 = w.value;
    m.m2 = w2.value;
    m.var_w = std::max(0.0, m.m2 - m.m1 * m.m1);
    m.cov_z_w = w.d1;
    m.cov_z2_w = w.d2 + 2.0 * g * w.d1;
    m.third_mixed = (w2.d2 - 2.0 * m.m1 * w.d2) + 2.0 * g * (w2.d1 - 2.0 * m.m1 * w.d1);
    return m;
}

double asym_sum(double r, double s, double n, double lambda) {
    if (!(r > 0.25) || !(s > -0.25))
        throw DomainError("asym_sum: requires r > 1/4 and s > -1/4");
    if (!(n > 0.0) || !(lambda > 0.0)) throw DomainError("asym_sum: n and lambda must be positive");
    const double beta = log_gamma_and_beta(r - 0.25, s + 0.25).beta;
    return beta / (4.0 * std::numbers::pi) * std::pow(n / lambda, 0.25);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
    // Acklam's rational approximation followed by one Halley step.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw DomainError("gauss_hermite: need at least one node");
    constexpr double kEps = 1e-15;
    constexpr int kMaxIter = 100;
    const double pim4 = std::pow(std::numbers::pi, -0.25);

    QuadratureRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        // Initial guesses for the largest roots first.
        if (i == 0)
            z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * rule.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * rule.nodes[1];
        else
            z = 2.0 * z - rule.nodes[i - 2];

        double pp = 0.0;
        int iter = 0;
        for (; iter < kMaxIter; ++iter) {
            double p1 = pim4;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= kEps * std::max(1.0, std::abs(z))) break;
        }
        if (iter == kMaxIter) throw NumericError("gauss_hermite: Newton iteration did not converge");
        rule.nodes[i] = z;
        rule.nodes[n - 1 - i] = -z;
        rule.weights[i] = 2.0 / (pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    // Ascending order.
    std::vector<double> nodes(rule.nodes.rbegin(), rule.nodes.rend());
    std::vector<double> weights(rule.weights.rbegin(), rule.weights.rend());
    rule.nodes = std::move(nodes);
    rule.weights = std::move(weights);
    return rule;
}

double gaussian_expectation(const QuadratureRule& rule, double mean,
                            const std::function<double(double)>& h) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * h(mean + std::numbers::sqrt2 * rule.nodes[i]);
    return sum / std::sqrt(std::numbers::pi);
}

}  // namespace splinesel
