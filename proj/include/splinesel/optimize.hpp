#pragma once

// One-dimensional minimization over the smoothing-parameter search window.
//
// The window runs from lambda_for_df(n - 0.5) to lambda_for_df(2.1).  A coarse
// pass evaluates 201 candidates equispaced in df, then golden-section search in
// log λ refines around the best candidate.

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "splinesel/spectrum.hpp"

namespace splinesel {

enum class Boundary { none, low_lambda, high_lambda };

std::string_view to_string(Boundary b);

struct SearchWindow {
    std::vector<double> lambdas;  ///< ascending
    std::vector<double> dfs;      ///< df at each candidate (descending)

    double lambda_min() const { return lambdas.front(); }
    double lambda_max() const { return lambdas.back(); }
    std::size_t size() const { return lambdas.size(); }
};

constexpr std::size_t kCoarseCandidates = 201;
constexpr double kLowDf = 2.1;
constexpr double kHighDfGap = 0.5;
constexpr double kLogLambdaTolerance = 1e-6;

SearchWindow make_search_window(const DesignSpectrum& spec, std::size_t candidates = kCoarseCandidates);

struct WindowMinimum {
    double lambda = 0.0;
    double value = 0.0;
    Boundary boundary = Boundary::none;
    std::size_t coarse_index = 0;
};

/// Minimize `objective` given its values at the window candidates.  Non-finite
/// coarse values are skipped; exact ties go to the larger λ.  The returned value
/// never exceeds any finite coarse value.
WindowMinimum minimize_on_window(const SearchWindow& window, std::span<const double> coarse_values,
                                 const std::function<double(double)>& objective,
                                 double log_tolerance = kLogLambdaTolerance);

/// Same, evaluating the coarse pass itself.
WindowMinimum minimize_on_window(const SearchWindow& window, const std::function<double(double)>& objective,
                                 double log_tolerance = kLogLambdaTolerance);

}  // namespace splinesel
