#include "splinesel/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Householder>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "splinesel/error.hpp"
#include "splinesel/specfun.hpp"

namespace splinesel {

namespace {

constexpr char kSpectrumMagic[8] = {'S', 'P', 'L', 'S', 'P', 'E', 'C', '\0'};
constexpr std::uint32_t kSpectrumFormatVersion = 1;

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

// "name(a,b)" -> name, {a, b}
std::pair<std::string, std::vector<double>> parse_call(const std::string& text) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw ConfigError("malformed distribution id '" + text + "', expected name(arg,...)");
    std::string name = text.substr(0, open);
    std::vector<double> args;
    std::stringstream ss(text.substr(open + 1, close - open - 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            args.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("non-numeric argument '" + item + "' in '" + text + "'");
        }
    }
    return {name, args};
}

double distribution_quantile(const std::string& distribution, double p) {
    const auto [name, args] = parse_call(distribution);
    if (name == "uniform") {
        if (args.size() != 2 || !(args[1] > args[0]))
            throw ConfigError("uniform(lo,hi) needs lo < hi");
        return args[0] + (args[1] - args[0]) * p;
    }
    if (name == "normal") {
        if (args.size() != 2 || !(args[1] > 0.0))
            throw ConfigError("normal(mean,sd) needs sd > 0");
        return args[0] + args[1] * normal_quantile(p);
    }
    throw ConfigError("unknown design distribution '" + name + "'");
}

DesignGrid validated(std::vector<double> x) {
    if (x.size() < 4) throw DomainError("design needs at least 4 points, got " + std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw DomainError("design point is not finite");
        if (i > 0 && !(x[i] > x[i - 1]))
            throw DomainError("design points must be strictly increasing (index " + std::to_string(i) + ")");
    }
    return DesignGrid{std::move(x)};
}

// Solve R X = B in place for a symmetric positive definite tridiagonal R given
// by its diagonal and superdiagonal.
void tridiagonal_cholesky_solve(const std::vector<double>& diag, const std::vector<double>& off,
                                Eigen::MatrixXd& B) {
    const std::size_t m = diag.size();
    // R = L Lᵀ with L lower bidiagonal: ld on the diagonal, ls below it.
    std::vector<double> ld(m), ls(m > 0 ? m - 1 : 0);
    for (std::size_t i = 0; i < m; ++i) {
        double d = diag[i];
        if (i > 0) {
            ls[i - 1] = off[i - 1] / ld[i - 1];
            d -= ls[i - 1] * ls[i - 1];
        }
        if (!(d > 0.0)) throw NumericError("penalty: tridiagonal factor is not positive definite");
        ld[i] = std::sqrt(d);
    }
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
        auto col = B.col(c);
        for (std::size_t i = 0; i < m; ++i) {
            if (i > 0) col(i) -= ls[i - 1] * col(i - 1);
            col(i) /= ld[i];
        }
        for (std::size_t i = m; i-- > 0;) {
            if (i + 1 < m) col(i) -= ls[i] * col(i + 1);
            col(i) /= ld[i];
        }
    }
}

}  // namespace

DesignGrid build_design(const DesignSpec& spec) {
    return std::visit(
        [](const auto& s) -> DesignGrid {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Equispaced>) {
                if (s.n < 4) throw DomainError("design needs at least 4 points");
                if (!(s.hi > s.lo)) throw DomainError("equispaced design needs lo < hi");
                std::vector<double> x(s.n);
                const double step = (s.hi - s.lo) / static_cast<double>(s.n - 1);
                for (std::size_t i = 0; i < s.n; ++i) x[i] = s.lo + static_cast<double>(i) * step;
                x.back() = s.hi;
                return validated(std::move(x));
            } else if constexpr (std::is_same_v<T, Quantile>) {
                if (s.n < 4) throw DomainError("design needs at least 4 points");
                std::vector<double> x(s.n);
                for (std::size_t i = 0; i < s.n; ++i)
                    x[i] = distribution_quantile(s.distribution,
                                                 (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(s.n)));
                return validated(std::move(x));
            } else {
                return validated(s.x);
            }
        },
        spec);
}

std::string describe(const DesignSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Equispaced>) {
                return "equispaced(" + format_number(s.lo) + "," + format_number(s.hi) + "," +
                       std::to_string(s.n) + ")";
            } else if constexpr (std::is_same_v<T, Quantile>) {
                return "quantile(" + s.distribution + "," + std::to_string(s.n) + ")";
            } else {
                std::ostringstream os;
                os << "explicit(" << s.x.size() << ",#" << std::hex
                   << fnv1a(s.x.data(), s.x.size() * sizeof(double)) << ")";
                return os.str();
            }
        },
        spec);
}

Eigen::MatrixXd penalty_matrix(const DesignGrid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (n < 4) throw DomainError("penalty_matrix: design needs at least 4 points");
    const auto& x = grid.x;
    const Eigen::Index m = n - 2;
    std::vector<double> h(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];

    // Column j of Q corresponds to interior knot j+1.
    std::vector<double> diag(m), off(m > 0 ? m - 1 : 0);
    Eigen::MatrixXd Qt = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double h0 = h[j];
        const double h1 = h[j + 1];
        Qt(j, j) = 1.0 / h0;
        Qt(j, j + 1) = -1.0 / h0 - 1.0 / h1;
        Qt(j, j + 2) = 1.0 / h1;
        diag[j] = (h0 + h1) / 3.0;
        if (j + 1 < m) off[j] = h1 / 6.0;
    }
    Eigen::MatrixXd X = Qt;  // becomes R⁻¹ Qᵀ
    tridiagonal_cholesky_solve(diag, off, X);

    // K = Q X; row i of Q has nonzeros only in columns i-2 .. i.
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = std::max<Eigen::Index>(0, i - 2); j <= std::min(i, m - 1); ++j)
            K.row(i) += Qt(j, i) * X.row(j);
    }
    return 0.5 * (K + K.transpose());
}

DesignSpectrum decompose(const DesignGrid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    const Eigen::MatrixXd K = penalty_matrix(grid);

    Eigen::MatrixXd linear(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        linear(i, 0) = 1.0;
        linear(i, 1) = grid.x[i];
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(linear);
    const auto H = qr.householderQ();

    Eigen::MatrixXd rotated = K;
    rotated.applyOnTheLeft(H.adjoint());
    rotated.applyOnTheRight(H);

    const Eigen::Index m = n - 2;
    const Eigen::MatrixXd block = rotated.bottomRightCorner(m, m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (block + block.transpose()));
    if (eig.info() != Eigen::Success) throw NumericError("decompose: eigensolver did not converge");

    DesignSpectrum spec;
    spec.n = static_cast<std::size_t>(n);
    spec.x = grid.x;
    spec.null_dim = 2;
    spec.k = Eigen::VectorXd::Zero(n);
    spec.k.tail(m) = eig.eigenvalues();
    if (!(spec.k(2) > 0.0))
        throw NumericError("decompose: penalty has more than two nonpositive eigenvalues");

    spec.U = Eigen::MatrixXd::Zero(n, n);
    spec.U.topLeftCorner(2, 2).setIdentity();
    spec.U.bottomRightCorner(m, m) = eig.eigenvectors();
    spec.U.applyOnTheLeft(H);
    return spec;
}

SmootherWeights weights(const DesignSpectrum& spec, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw DomainError("weights: lambda must be finite and nonnegative");
    SmootherWeights w;
    w.lambda = lambda;
    w.null_dim = spec.null_dim;
    const Eigen::VectorXd lk = lambda * spec.k;
    w.a = (1.0 + lk.array()).inverse().matrix();
    w.b = (lk.array() * w.a.array()).matrix();
    return w;
}

double df(const DesignSpectrum& spec, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("df: lambda must be nonnegative");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < spec.k.size(); ++i) sum += 1.0 / (1.0 + lambda * spec.k(i));
    return sum;
}

double lambda_for_df(const DesignSpectrum& spec, double target) {
    const auto n = static_cast<double>(spec.n);
    if (!(target > static_cast<double>(spec.null_dim)) || !(target < n))
        throw DomainError("lambda_for_df: target df must lie in (" + std::to_string(spec.null_dim) + ", " +
                          std::to_string(spec.n) + ")");
    const double kmax = spec.k(spec.k.size() - 1);
    const double kmin = spec.k(static_cast<Eigen::Index>(spec.null_dim));
    double lo = 1e-6 / kmax;
    double hi = 1e6 / kmin;
    for (int guard = 0; df(spec, lo) <= target; ++guard) {
        if (guard > 100) throw NumericError("lambda_for_df: could not bracket target from below");
        lo *= 1e-3;
    }
    for (int guard = 0; df(spec, hi) >= target; ++guard) {
        if (guard > 100) throw NumericError("lambda_for_df: could not bracket target from above");
        hi *= 1e3;
    }
    double mid = std::sqrt(lo * hi);
    for (int iter = 0; iter < 2000; ++iter) {
        mid = std::sqrt(lo * hi);
        const double d = df(spec, mid);
        if (std::abs(d - target) <= 1e-9) return mid;
        if (d > target)
            lo = mid;
        else
            hi = mid;
        if (hi / lo - 1.0 < 1e-15) break;
    }
    return mid;
}

Eigen::VectorXd smooth(const DesignSpectrum& spec, double lambda, const Eigen::VectorXd& y) {
    if (static_cast<std::size_t>(y.size()) != spec.n)
        throw DomainError("smooth: data length " + std::to_string(y.size()) + " does not match n = " +
                          std::to_string(spec.n));
    const SmootherWeights w = weights(spec, lambda);
    const Eigen::VectorXd coords = spec.U.transpose() * y;
    return spec.U * (w.a.array() * coords.array()).matrix();
}

Eigen::VectorXd rotate(const DesignSpectrum& spec, const Eigen::VectorXd& v, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("rotate: sigma must be positive");
    if (static_cast<std::size_t>(v.size()) != spec.n) throw DomainError("rotate: length mismatch");
    return spec.U.transpose() * v / sigma;
}

// ------------------------------------------------------------ persistence --

void save_spectrum(const DesignSpectrum& spec, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write spectrum file " + tmp.string());
        const std::uint32_t version = kSpectrumFormatVersion;
        const auto null_dim = static_cast<std::uint32_t>(spec.null_dim);
        const auto n = static_cast<std::uint64_t>(spec.n);
        out.write(kSpectrumMagic, sizeof kSpectrumMagic);
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        out.write(reinterpret_cast<const char*>(&null_dim), sizeof null_dim);
        out.write(reinterpret_cast<const char*>(&n), sizeof n);
        out.write(reinterpret_cast<const char*>(spec.x.data()), static_cast<std::streamsize>(n * sizeof(double)));
        out.write(reinterpret_cast<const char*>(spec.k.data()), static_cast<std::streamsize>(n * sizeof(double)));
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = spec.U;
        out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(n * n * sizeof(double)));
        if (!out) throw ConfigError("failed writing spectrum file " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

DesignSpectrum load_spectrum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open spectrum file " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint32_t null_dim = 0;
    std::uint64_t n = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&null_dim), sizeof null_dim);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || std::memcmp(magic, kSpectrumMagic, sizeof magic) != 0)
        throw ConfigError(path.string() + " is not a spectrum file");
    if (version != kSpectrumFormatVersion)
        throw ConfigError(path.string() + ": unsupported spectrum format version " + std::to_string(version));
    if (n < 4 || n > (1u << 20)) throw ConfigError(path.string() + ": implausible n");

    DesignSpectrum spec;
    spec.n = static_cast<std::size_t>(n);
    spec.null_dim = null_dim;
    spec.x.resize(n);
    spec.k.resize(static_cast<Eigen::Index>(n));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(n, n);
    in.read(reinterpret_cast<char*>(spec.x.data()), static_cast<std::streamsize>(n * sizeof(double)));
    in.read(reinterpret_cast<char*>(spec.k.data()), static_cast<std::streamsize>(n * sizeof(double)));
    in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(n * n * sizeof(double)));
    if (!in) throw ConfigError(path.string() + ": truncated spectrum file");
    spec.U = rows;
    return spec;
}

SpectrumCache::SpectrumCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

std::filesystem::path SpectrumCache::file_for(const std::string& key) const {
    std::string name;
    for (char c : key) name += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    std::ostringstream os;
    os << name << "_" << std::hex << fnv1a(key.data(), key.size()) << ".spec";
    return directory_ / os.str();
}

std::shared_ptr<const DesignSpectrum> SpectrumCache::get(const DesignSpec& spec) {
    const std::string key = describe(spec);
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    const DesignGrid grid = build_design(spec);
    std::shared_ptr<const DesignSpectrum> result;
    if (!directory_.empty()) {
        const auto file = file_for(key);
        if (std::filesystem::exists(file)) {
            try {
                auto loaded = std::make_shared<DesignSpectrum>(load_spectrum(file));
                if (loaded->x == grid.x) result = std::move(loaded);
            } catch (const ConfigError&) {
                // unreadable cache entries are rebuilt below
            }
        }
        if (!result) {
            auto built = std::make_shared<DesignSpectrum>(decompose(grid));
            save_spectrum(*built, file);
            result = std::move(built);
        }
    } else {
        result = std::make_shared<DesignSpectrum>(decompose(grid));
    }
    memo_.emplace(key, result);
    return result;
}

}  // namespace splinesel
