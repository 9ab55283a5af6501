#include "splinesel/criteria.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "splinesel/error.hpp"
#include "splinesel/specfun.hpp"

namespace splinesel {

namespace {

double power(double x, double e) {
    if (e == 1.0) return x;
    if (e == 2.0) return x * x;
    if (e == 0.0) return 1.0;
    return std::pow(x, e);
}

std::string format_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Shrinkage pair for one coordinate, with b computed directly so it keeps full
// relative precision when λk is tiny.
struct Shrink {
    double a;
    double b;
};

Shrink shrink(double lambda, double k) {
    const double lk = lambda * k;
    return {1.0 / (1.0 + lk), lk / (1.0 + lk)};
}

void check_length(const DesignSpectrum& spec, const Eigen::VectorXd& v, const char* what) {
    if (static_cast<std::size_t>(v.size()) != spec.n)
        throw DomainError(std::string(what) + ": length " + std::to_string(v.size()) + " does not match n = " +
                          std::to_string(spec.n));
}

// Per-coordinate terms of the loss: coefficient of u and the constant part.
struct LossTerms {
    double coef;
    double constant;
};

LossTerms loss_terms(const Criterion& c, double b) {
    const double t = c.cq * power(b, 1.0 / c.q);
    if (c.p == 1.0) return {t, -std::log(b) / c.q};
    return {power(t, c.p), -(c.p / (c.p - 1.0)) * (power(t, c.p - 1.0) - 1.0)};
}

}  // namespace

Criterion Criterion::make(double p, double q, std::string name) {
    if (!(p >= 1.0) || !(q >= 1.0) || !std::isfinite(p) || !std::isfinite(q))
        throw DomainError("criterion: p and q must be finite and >= 1");
    Criterion c;
    c.p = p;
    c.q = q;
    c.cq = c_q(q);
    c.name = name.empty() ? "pq(" + format_g(p) + "," + format_g(q) + ")" : std::move(name);
    return c;
}

Criterion cp() { return Criterion::make(2.0, 1.0, "cp"); }
Criterion gml() { return Criterion::make(1.0, 1.0, "gml"); }
Criterion ee() { return Criterion::make(1.5, 1.5, "ee"); }

Criterion criterion_from_id(std::string_view id) {
    std::string s;
    for (char ch : id)
        if (!std::isspace(static_cast<unsigned char>(ch))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "cp") return cp();
    if (s == "gml") return gml();
    if (s == "ee") return ee();
    if (s.size() > 5 && s.rfind("pq(", 0) == 0 && s.back() == ')') {
        const std::string body = s.substr(3, s.size() - 4);
        const auto comma = body.find(',');
        if (comma != std::string::npos) {
            try {
                std::size_t used1 = 0, used2 = 0;
                const std::string ps = body.substr(0, comma), qs = body.substr(comma + 1);
                const double p = std::stod(ps, &used1);
                const double q = std::stod(qs, &used2);
                if (used1 == ps.size() && used2 == qs.size()) return Criterion::make(p, q);
            } catch (const DomainError& e) {
                throw ConfigError(std::string("criterion '") + std::string(id) + "': " + e.what());
            } catch (const std::exception&) {
            }
        }
    }
    throw ConfigError("unknown criterion '" + std::string(id) + "' (expected cp, gml, ee or pq(p,q))");
}

Eigen::VectorXd transform(const Criterion& c, const Eigen::VectorXd& z) {
    const double e = 2.0 / c.q;
    Eigen::VectorXd u(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double az = std::abs(z[i]);
        u[i] = e == 2.0 ? az * az : std::pow(az, e);
    }
    return u;
}

double loss(const Criterion& c, const SmootherWeights& w, const Eigen::VectorXd& u) {
    if (u.size() != w.b.size()) throw DomainError("loss: u and weights differ in length");
    if (c.p == 1.0 && w.lambda == 0.0) throw DomainError("loss: p = 1 requires lambda > 0");
    double total = 0.0;
    for (Eigen::Index i = static_cast<Eigen::Index>(w.null_dim); i < u.size(); ++i) {
        const LossTerms lt = loss_terms(c, w.b[i]);
        total += lt.coef * u[i] + lt.constant;
    }
    return total;
}

double loss_at(const Criterion& c, const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& u) {
    check_length(spec, u, "loss");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("loss: lambda must be finite and >= 0");
    if (c.p == 1.0 && lambda == 0.0) throw DomainError("loss: p = 1 requires lambda > 0");
    double total = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const LossTerms lt = loss_terms(c, shrink(lambda, spec.k[i]).b);
        total += lt.coef * u[i] + lt.constant;
    }
    return total;
}

LossDerivatives loss_derivs(const Criterion& c, const DesignSpectrum& spec, double lambda,
                            const Eigen::VectorXd& u) {
    check_length(spec, u, "loss_derivs");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("loss_derivs: lambda must be positive");
    const double pq = c.p / c.q;
    LossDerivatives d;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const auto [a, b] = shrink(lambda, spec.k[i]);
        const double t = c.cq * power(b, 1.0 / c.q);
        const double tp1 = power(t, c.p - 1.0);
        const double h = pq / lambda * a * tp1 * t;   // −η̇
        const double h_mu = pq / lambda * a * tp1;     // −η̇ μ
        const double hdot_factor = ((1.0 + pq) * a - 2.0) / lambda;
        d.first += h * u[i] - h_mu;
        d.second += hdot_factor * (h * u[i] - h_mu) + h_mu * a / (c.q * lambda);
    }
    return d;
}

Selector::Selector(Criterion c, const DesignSpectrum& spec, const SearchWindow& window)
    : c_(std::move(c)), spec_(spec), window_(window) {
    const std::size_t m = spec.n - spec.null_dim;
    coef_.resize(static_cast<Eigen::Index>(window_.size()), static_cast<Eigen::Index>(m));
    offset_.setZero(static_cast<Eigen::Index>(window_.size()));
    for (std::size_t j = 0; j < window_.size(); ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            const LossTerms lt = loss_terms(c_, shrink(window_.lambdas[j], spec.k[spec.null_dim + i]).b);
            coef_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = lt.coef;
            offset_[static_cast<Eigen::Index>(j)] += lt.constant;
        }
    }
}

Selector::Selector(Criterion c, const DesignSpectrum& spec) : Selector(std::move(c), spec, make_search_window(spec)) {}

SelectionResult Selector::operator()(const Eigen::VectorXd& z) const {
    check_length(spec_, z, "select");
    if (!z.allFinite()) throw DomainError("select: z must be finite");
    return from_transformed(transform(c_, z));
}

SelectionResult Selector::from_transformed(const Eigen::VectorXd& u) const {
    check_length(spec_, u, "select");
    const Eigen::Index m = static_cast<Eigen::Index>(spec_.n - spec_.null_dim);
    const Eigen::VectorXd coarse = coef_ * u.tail(m) + offset_;
    const auto objective = [&](double lambda) { return loss_at(c_, spec_, lambda, u); };
    const WindowMinimum best =
        minimize_on_window(window_, std::span<const double>(coarse.data(), window_.size()), objective);
    SelectionResult r;
    r.lambda_hat = best.lambda;
    r.df_hat = df(spec_, best.lambda);
    r.loss = best.value;
    r.at_boundary = best.boundary;
    return r;
}

SelectionResult select(const Criterion& c, const DesignSpectrum& spec, const Eigen::VectorXd& z) {
    check_length(spec, z, "select");
    if (!z.allFinite()) throw DomainError("select: z must be finite");
    const SearchWindow window = make_search_window(spec);
    const Eigen::VectorXd u = transform(c, z);
    const WindowMinimum best =
        minimize_on_window(window, [&](double lambda) { return loss_at(c, spec, lambda, u); });
    SelectionResult r;
    r.lambda_hat = best.lambda;
    r.df_hat = df(spec, best.lambda);
    r.loss = best.value;
    r.at_boundary = best.boundary;
    return r;
}

namespace {

double residual_sum_of_squares(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y) {
    const Eigen::VectorXd coords = spec.U.transpose() * y;
    double rss = 0.0;
    for (std::size_t i = spec.null_dim; i < spec.n; ++i) {
        const double rb = shrink(lambda, spec.k[i]).b * coords[static_cast<Eigen::Index>(i)];
        rss += rb * rb;
    }
    return rss;
}

void check_classic(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y, double omega) {
    check_length(spec, y, "classic_statistics");
    if (!(lambda >= 0.0)) throw DomainError("classic_statistics: lambda must be >= 0");
    if (!(omega > 0.0)) throw DomainError("classic_statistics: omega must be positive");
}

}  // namespace

double cp_statistic(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y, double sigma,
                    double omega) {
    check_classic(spec, lambda, y, omega);
    if (!(sigma > 0.0)) throw DomainError("cp_statistic: sigma must be positive");
    const double s2 = sigma * sigma;
    return residual_sum_of_squares(spec, lambda, y) + 2.0 * omega * s2 * df(spec, lambda) -
           static_cast<double>(spec.n) * s2;
}

double gcv_statistic(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y, double omega) {
    check_classic(spec, lambda, y, omega);
    const double ratio = omega * df(spec, lambda) / static_cast<double>(spec.n);
    if (!(ratio < 1.0)) throw DomainError("gcv_statistic: omega * df must be below n");
    const double denom = 1.0 - ratio;
    return residual_sum_of_squares(spec, lambda, y) / (denom * denom);
}

ClassicStatistics classic_statistics(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y,
                                     double sigma, double omega) {
    return {cp_statistic(spec, lambda, y, sigma, omega), gcv_statistic(spec, lambda, y, omega)};
}

double sigma_estimate(const DesignSpectrum& spec, const Eigen::VectorXd& y, std::size_t M) {
    check_length(spec, y, "sigma_estimate");
    if (M < 5 || M + 5 > spec.n)
        throw DomainError("sigma_estimate: M must satisfy 5 <= M <= n - 5, got M = " + std::to_string(M));
    const Eigen::VectorXd coords = spec.U.transpose() * y;
    const Eigen::Index count = static_cast<Eigen::Index>(M + 2);
    return coords.tail(count).squaredNorm() / static_cast<double>(M - 2);
}

std::size_t default_sigma_terms(std::size_t n) {
    return std::max<std::size_t>(20, static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0)));
}

}  // namespace splinesel
