#pragma once

// Cubic smoothing-spline penalty and its Demmler–Reinsch decomposition.
//
// For a design x the smoother is A_λ = U diag(a_λ) Uᵀ with a_λi = 1/(1 + λ k_i).
// The penalty is the natural cubic spline roughness K = Q R⁻¹ Qᵀ (∫ f''²).

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

namespace splinesel {

// ---------------------------------------------------------------- designs --

/// n equally spaced points lo = x_1 < ... < x_n = hi.
struct Equispaced {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t n = 0;
};

/// x_i = G⁻¹((2i - 1)/(2n)) for a named distribution G:
/// "uniform(lo,hi)" or "normal(mean,sd)".
struct Quantile {
    std::string distribution;
    std::size_t n = 0;
};

/// Explicitly listed design points (strictly increasing).
struct Explicit {
    std::vector<double> x;
};

using DesignSpec = std::variant<Equispaced, Quantile, Explicit>;

/// Strictly increasing design points, n >= 4.
struct DesignGrid {
    std::vector<double> x;
    std::size_t size() const { return x.size(); }
};

DesignGrid build_design(const DesignSpec& spec);

/// Canonical text form of a design spec, e.g. "equispaced(-1,1,61)".
std::string describe(const DesignSpec& spec);

// --------------------------------------------------------------- spectrum --

/// Demmler–Reinsch decomposition of a design.  Immutable once built; share it
/// across threads through std::shared_ptr<const DesignSpectrum>.
struct DesignSpectrum {
    std::size_t n = 0;
    std::vector<double> x;
    Eigen::MatrixXd U;      ///< orthogonal, columns are eigenvectors
    Eigen::VectorXd k;      ///< ascending penalty eigenvalues, k[0] = k[1] = 0
    std::size_t null_dim = 2;
};

/// Natural cubic spline penalty matrix K = Q R⁻¹ Qᵀ (dense, n×n).
Eigen::MatrixXd penalty_matrix(const DesignGrid& grid);

/// Build K and decompose it.  The null space span{1, x} is deflated exactly
/// with two Householder reflections, so the first two columns of U span the
/// linear functions and k[0] = k[1] = 0 hold exactly.
DesignSpectrum decompose(const DesignGrid& grid);

/// Shrinkage weights at one smoothing parameter.
struct SmootherWeights {
    double lambda = 0.0;
    Eigen::VectorXd a;  ///< 1/(1 + λ k_i)
    Eigen::VectorXd b;  ///< 1 - a_i = λ k_i a_i
    std::size_t null_dim = 2;
};

SmootherWeights weights(const DesignSpectrum& spec, double lambda);

/// Degrees of freedom tr(A_λ) = Σ a_λi.
double df(const DesignSpectrum& spec, double lambda);

/// λ with |df(λ) - target| <= 1e-9, by bisection on log λ.  Requires
/// null_dim < target < n.
double lambda_for_df(const DesignSpectrum& spec, double target);

/// f̂ = U diag(a_λ) Uᵀ y.
Eigen::VectorXd smooth(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y);

/// Spectral coordinates Uᵀ v / σ.
Eigen::VectorXd rotate(const DesignSpectrum& spec, const Eigen::VectorXd& v, double sigma);

// ------------------------------------------------------------ persistence --

/// Binary spectrum file, little-endian:
///   char[8]  magic "SPLSPEC\0"
///   uint32   format version (1)
///   uint32   null_dim
///   uint64   n
///   double   x[n]
///   double   k[n]
///   double   U[n*n], row-major
void save_spectrum(const DesignSpectrum& spec, const std::filesystem::path& path);
DesignSpectrum load_spectrum(const std::filesystem::path& path);

/// Spectra keyed by design description, memoized in memory and, when a
/// directory is given, persisted to disk.  Thread-safe.
class SpectrumCache {
public:
    explicit SpectrumCache(std::filesystem::path directory = {});

    std::shared_ptr<const DesignSpectrum> get(const DesignSpec& spec);

    const std::filesystem::path& directory() const { return directory_; }

private:
    std::filesystem::path file_for(const std::string& key) const;

    std::filesystem::path directory_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const DesignSpectrum>> memo_;
};

}  // namespace splinesel
