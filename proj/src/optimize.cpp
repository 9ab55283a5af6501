#include "splinesel/optimize.hpp"

#include <cmath>
#include <limits>

#include "splinesel/error.hpp"

namespace splinesel {

std::string_view to_string(Boundary b) {
    switch (b) {
        case Boundary::none: return "none";
        case Boundary::low_lambda: return "low";
        case Boundary::high_lambda: return "high";
    }
    return "none";
}

SearchWindow make_search_window(const DesignSpectrum& spec, std::size_t candidates) {
    if (candidates < 3) throw DomainError("make_search_window: need at least 3 candidates");
    const double df_hi = static_cast<double>(spec.n) - kHighDfGap;
    if (!(df_hi > kLowDf)) throw DomainError("make_search_window: design too small for the df window");
    SearchWindow w;
    w.lambdas.resize(candidates);
    w.dfs.resize(candidates);
    // Candidate j (ascending λ) has df = df_hi - j * step.
    const double step = (df_hi - kLowDf) / static_cast<double>(candidates - 1);
    for (std::size_t j = 0; j < candidates; ++j) {
        const double target = (j + 1 == candidates) ? kLowDf : df_hi - static_cast<double>(j) * step;
        w.dfs[j] = target;
        w.lambdas[j] = lambda_for_df(spec, target);
    }
    return w;
}

WindowMinimum minimize_on_window(const SearchWindow& window, std::span<const double> coarse_values,
                                 const std::function<double(double)>& objective, double log_tolerance) {
    const std::size_t m = window.size();
    if (coarse_values.size() != m) throw DomainError("minimize_on_window: coarse value count mismatch");

    std::size_t best = m;
    for (std::size_t j = 0; j < m; ++j) {
        const double v = coarse_values[j];
        if (!std::isfinite(v)) continue;
        if (best == m || v <= coarse_values[best]) best = j;  // '<=' prefers larger λ on ties
    }
    if (best == m) throw NumericError("minimize_on_window: objective failed at every candidate");

    WindowMinimum result;
    result.coarse_index = best;
    result.lambda = window.lambdas[best];
    result.value = coarse_values[best];
    if (best == 0)
        result.boundary = Boundary::low_lambda;
    else if (best + 1 == m)
        result.boundary = Boundary::high_lambda;

    double lo = std::log(window.lambdas[best == 0 ? 0 : best - 1]);
    double hi = std::log(window.lambdas[best + 1 == m ? m - 1 : best + 1]);

    const auto f = [&](double t) {
        const double v = objective(std::exp(t));
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    double best_t = std::log(result.lambda);
    double best_v = result.value;
    const auto consider = [&](double t, double v) {
        if (v < best_v || (v == best_v && t > best_t)) {
            best_v = v;
            best_t = t;
        }
    };
    consider(x1, f1);
    consider(x2, f2);
    for (int iter = 0; iter < 200 && hi - lo >= log_tolerance; ++iter) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kInvPhi * (hi - lo);
            f1 = f(x1);
            consider(x1, f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kInvPhi * (hi - lo);
            f2 = f(x2);
            consider(x2, f2);
        }
    }
    result.lambda = std::exp(best_t);
    result.value = best_v;
    return result;
}

WindowMinimum minimize_on_window(const SearchWindow& window, const std::function<double(double)>& objective,
                                 double log_tolerance) {
    std::vector<double> values(window.size());
    for (std::size_t j = 0; j < window.size(); ++j) {
        try {
            values[j] = objective(window.lambdas[j]);
        } catch (const DomainError&) {
            values[j] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return minimize_on_window(window, values, objective, log_tolerance);
}

}  // namespace splinesel
