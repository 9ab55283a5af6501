#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "splinesel/oracle.hpp"
#include "splinesel/simlab.hpp"
#include "splinesel/spectrum.hpp"

namespace testing_support {

using namespace splinesel;

/// Equispaced design on [lo, hi], decomposed once per process.
inline const DesignSpectrum& equispaced_spectrum(std::size_t n, double lo = -1.0, double hi = 1.0) {
    static std::mutex mutex;
    static std::map<std::tuple<std::size_t, double, double>, std::unique_ptr<DesignSpectrum>> memo;
    std::lock_guard lock(mutex);
    auto& slot = memo[{n, lo, hi}];
    if (!slot) slot = std::make_unique<DesignSpectrum>(decompose(build_design(Equispaced{lo, hi, n})));
    return *slot;
}

inline TruthSpectrum truth_for(const DesignSpectrum& spec, const std::string& id = "paper-fig3", double sigma = 1.0) {
    return make_truth(spec, truth_curve(id, spec.x), sigma);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    const auto dir = std::filesystem::temp_directory_path() / ("splinesel_test_" + tag + "_" + std::to_string(rng()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Dense penalty built independently of the library: K = Q R⁻¹ Qᵀ via a dense inverse.
inline Eigen::MatrixXd dense_penalty(const std::vector<double>& x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n - 2);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n - 2, n - 2);
    for (Eigen::Index j = 0; j < n - 2; ++j) {
        const double h0 = x[j + 1] - x[j], h1 = x[j + 2] - x[j + 1];
        Q(j, j) = 1.0 / h0;
        Q(j + 1, j) = -1.0 / h0 - 1.0 / h1;
        Q(j + 2, j) = 1.0 / h1;
        R(j, j) = (h0 + h1) / 3.0;
        if (j + 1 < n - 2) R(j, j + 1) = R(j + 1, j) = h1 / 6.0;
    }
    return Q * R.inverse() * Q.transpose();
}

}  // namespace testing_support
