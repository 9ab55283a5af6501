#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "splinesel/error.hpp"
#include "splinesel/rng.hpp"
#include "splinesel/spectrum.hpp"
#include "support.hpp"

using namespace splinesel;
using testing_support::dense_penalty;
using testing_support::equispaced_spectrum;

TEST_SUITE("spectrum") {

TEST_CASE("equispaced and quantile designs") {
    const DesignGrid g61 = build_design(Equispaced{-1.0, 1.0, 61});
    REQUIRE(g61.size() == 61);
    CHECK(g61.x.front() == -1.0);
    CHECK(g61.x.back() == 1.0);
    CHECK(g61.x[1] - g61.x[0] == doctest::Approx(1.0 / 30.0).epsilon(1e-13));

    const DesignGrid g5 = build_design(Equispaced{0.0, 1.0, 5});
    const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t i = 0; i < 5; ++i) CHECK(g5.x[i] == doctest::Approx(expected[i]).epsilon(1e-15));

    const DesignGrid gq = build_design(Quantile{"uniform(0,1)", 4});
    const std::vector<double> quarters{0.125, 0.375, 0.625, 0.875};
    for (std::size_t i = 0; i < 4; ++i) CHECK(gq.x[i] == doctest::Approx(quarters[i]).epsilon(1e-15));

    const DesignGrid gn = build_design(Quantile{"normal(0,1)", 9});
    CHECK(std::abs(gn.x[4]) < 1e-12);
    CHECK(gn.x[0] == doctest::Approx(-gn.x[8]).epsilon(1e-12));

    CHECK(describe(Equispaced{-1.0, 1.0, 61}) == "equispaced(-1,1,61)");
}

TEST_CASE("design errors") {
    CHECK_THROWS_AS(build_design(Equispaced{0.0, 1.0, 3}), DomainError);
    CHECK_THROWS_AS(build_design(Explicit{{0.0, 1.0, 1.0, 2.0}}), DomainError);
    CHECK_THROWS_AS(build_design(Explicit{{0.0, 2.0, 1.0, 3.0}}), DomainError);
    CHECK_THROWS_AS(build_design(Quantile{"cauchy(0,1)", 10}), ConfigError);
    CHECK_THROWS_AS(build_design(Quantile{"uniform(1,0)", 10}), ConfigError);
}

TEST_CASE("smallest design has rank two penalty") {
    const DesignSpectrum s = decompose(build_design(Equispaced{0.0, 1.0, 4}));
    CHECK(s.k[0] == 0.0);
    CHECK(s.k[1] == 0.0);
    CHECK(s.k[2] > 0.0);
    CHECK(s.k[3] >= s.k[2]);
    CHECK(s.null_dim == 2);
}

TEST_CASE("decomposition invariants") {
    for (std::size_t n : {20u, 61u, 121u}) {
        const DesignSpectrum& s = equispaced_spectrum(n);
        const auto N = static_cast<Eigen::Index>(n);
        const double orth = (s.U.transpose() * s.U - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
        CHECK(orth <= 1e-8);

        CHECK(s.k[0] == 0.0);
        CHECK(s.k[1] == 0.0);
        std::size_t positive = 0;
        for (Eigen::Index i = 1; i < N; ++i) CHECK(s.k[i] >= s.k[i - 1]);
        for (Eigen::Index i = 0; i < N; ++i) positive += s.k[i] > 0.0;
        CHECK(positive == n - 2);

        const Eigen::MatrixXd K = dense_penalty(s.x);
        const Eigen::MatrixXd rebuilt = s.U * s.k.asDiagonal() * s.U.transpose();
        CHECK((rebuilt - K).cwiseAbs().maxCoeff() <= 1e-6 * s.k.maxCoeff());

        // First two columns span {1, x}.
        Eigen::MatrixXd basis(N, 2);
        for (Eigen::Index i = 0; i < N; ++i) basis.row(i) << 1.0, s.x[i];
        const Eigen::MatrixXd P = s.U.leftCols(2) * s.U.leftCols(2).transpose();
        CHECK((P * basis - basis).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("library penalty equals the dense construction") {
    const DesignGrid grid = build_design(Explicit{{0.0, 0.1, 0.35, 0.4, 0.9, 1.3, 2.0, 2.2}});
    const Eigen::MatrixXd K = penalty_matrix(grid);
    CHECK((K - dense_penalty(grid.x)).cwiseAbs().maxCoeff() <= 1e-10 * K.cwiseAbs().maxCoeff());
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trace oracle at n = 61") {
    const DesignSpectrum& s = equispaced_spectrum(61);
    const Eigen::MatrixXd K = dense_penalty(s.x);
    CHECK(s.k[2] > 0.0);
    for (double lambda : {1e-6, 1e-3, 0.0261719, 1.0, 100.0}) {
        const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(61, 61) + lambda * K).inverse();
        const SmootherWeights w = weights(s, lambda);
        const double penalized = w.a.tail(59).sum();
        CHECK(std::abs(penalized - (inv.trace() - 2.0)) < 1e-8);
    }
}

TEST_CASE("smoother weights") {
    const DesignSpectrum& s = equispaced_spectrum(61);
    const SmootherWeights w0 = weights(s, 0.0);
    CHECK(w0.a.minCoeff() == 1.0);
    CHECK(w0.b.maxCoeff() == 0.0);

    const double lambda = 1.0 / s.k[10];
    const SmootherWeights w = weights(s, lambda);
    CHECK(w.a[10] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w.b[10] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w.a[0] == 1.0);
    CHECK(w.a[1] == 1.0);
    for (Eigen::Index i = 0; i < 61; ++i) {
        CHECK(w.a[i] + w.b[i] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(w.b[i] == doctest::Approx(lambda * s.k[i] * w.a[i]).epsilon(1e-12));
        if (i > 0) CHECK(w.a[i] <= w.a[i - 1]);
    }
    CHECK_THROWS_AS(weights(s, -1.0), DomainError);
    CHECK_THROWS_AS(weights(s, std::nan("")), DomainError);
}

TEST_CASE("degrees of freedom") {
    const DesignSpectrum& s = equispaced_spectrum(61);
    CHECK(df(s, 0.0) == doctest::Approx(61.0).epsilon(1e-15));
    CHECK(std::abs(df(s, 1e12) - 2.0) < 1e-6);

    double previous = df(s, 1e-8);
    for (int i = 1; i < 50; ++i) {
        const double current = df(s, 1e-8 * std::pow(10.0, 14.0 * i / 49.0));
        CHECK(current < previous);
        previous = current;
    }

    for (double target : {2.5, 3.0, 10.0, 60.0, 61.0 - 1e-3}) {
        const double lambda = lambda_for_df(s, target);
        CHECK(lambda > 0.0);
        CHECK(std::isfinite(lambda));
        CHECK(std::abs(df(s, lambda) - target) <= 1e-9);
    }
    CHECK(lambda_for_df(s, 61.0 - 1e-3) < 1e-6);
    CHECK(lambda_for_df(s, 2.5) > 1.0);
    CHECK_THROWS_AS(lambda_for_df(s, 2.0), DomainError);
    CHECK_THROWS_AS(lambda_for_df(s, 61.0), DomainError);
}

TEST_CASE("smoothing") {
    const DesignSpectrum& s = equispaced_spectrum(61);
    NormalStream noise(11, 61, 0);
    const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(truth_curve("paper-fig3", s.x).data(), 61);
    const Eigen::VectorXd y = f + noise.vector(61);

    CHECK((smooth(s, 0.0, y) - y).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd line(61);
    for (Eigen::Index i = 0; i < 61; ++i) line[i] = 3.0 - 2.0 * s.x[i];
    for (double lambda : {0.0, 1e-3, 1.0, 1e6}) CHECK((smooth(s, lambda, line) - line).cwiseAbs().maxCoeff() < 1e-10);

    const double lambda = lambda_for_df(s, 10.0);
    const Eigen::MatrixXd K = dense_penalty(s.x);
    const Eigen::VectorXd direct = (Eigen::MatrixXd::Identity(61, 61) + lambda * K).ldlt().solve(y);
    CHECK((smooth(s, lambda, y) - direct).cwiseAbs().maxCoeff() < 1e-8);

    CHECK_THROWS_AS(smooth(s, 1.0, Eigen::VectorXd::Zero(60)), DomainError);
}

TEST_CASE("rotation") {
    const DesignSpectrum& s = equispaced_spectrum(61);
    const double sigma = 2.5;
    for (Eigen::Index j : {0, 7, 60}) {
        const Eigen::VectorXd e = rotate(s, sigma * s.U.col(j), sigma);
        CHECK(std::abs(e[j] - 1.0) < 1e-12);
        CHECK(std::abs(e.norm() - 1.0) < 1e-12);
    }
    NormalStream noise(5, 61, 3);
    const Eigen::VectorXd v = noise.vector(61);
    CHECK(std::abs(rotate(s, v, 1.0).norm() - v.norm()) < 1e-10);
    CHECK(std::abs(rotate(s, v, sigma).norm() - v.norm() / sigma) < 1e-10);

    // smooth = σ U diag(a) rotate(y, σ)
    const SmootherWeights w = weights(s, 0.01);
    const Eigen::VectorXd round_trip = sigma * s.U * (w.a.asDiagonal() * rotate(s, v, sigma));
    CHECK((round_trip - smooth(s, 0.01, v)).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(truth_curve("paper-fig3", s.x).data(), 61);
    const Eigen::VectorXd g = rotate(s, f, 1.0);
    const double roughness = (s.k.tail(59).array() * g.tail(59).array().square()).sum();
    CHECK(std::isfinite(roughness));
    CHECK(roughness > 0.0);

    CHECK_THROWS_AS(rotate(s, v, 0.0), DomainError);
}

TEST_CASE("spectrum file round trip") {
    const auto dir = testing_support::scratch_dir("spectrum");
    const DesignSpectrum s = decompose(build_design(Explicit{{-2.0, -1.5, 0.0, 0.2, 1.0, 4.0}}));
    save_spectrum(s, dir / "a.spec");
    const DesignSpectrum r = load_spectrum(dir / "a.spec");
    CHECK(r.n == s.n);
    CHECK(r.null_dim == s.null_dim);
    CHECK(r.x == s.x);
    CHECK(r.k == s.k);
    CHECK(r.U == s.U);

    const auto size = std::filesystem::file_size(dir / "a.spec");
    CHECK(size == 8 + 4 + 4 + 8 + 8 * (6 + 6 + 36));

    {
        std::ofstream bad(dir / "bad.spec", std::ios::binary);
        bad << "NOTASPECFILE-----------------------";
    }
    CHECK_THROWS_AS(load_spectrum(dir / "bad.spec"), ConfigError);
    std::filesystem::resize_file(dir / "a.spec", size - 8);
    CHECK_THROWS_AS(load_spectrum(dir / "a.spec"), ConfigError);
    CHECK_THROWS_AS(load_spectrum(dir / "missing.spec"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("spectrum cache persists and reuses entries") {
    const auto dir = testing_support::scratch_dir("cache");
    const DesignSpec design = Equispaced{-1.0, 1.0, 31};
    std::shared_ptr<const DesignSpectrum> first;
    {
        SpectrumCache cache(dir);
        first = cache.get(design);
        CHECK(cache.get(design) == first);
    }
    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) files += entry.is_regular_file();
    CHECK(files == 1);

    SpectrumCache reopened(dir);
    const auto second = reopened.get(design);
    CHECK(second->U == first->U);
    CHECK(second->k == first->k);

    // A corrupt entry is rebuilt rather than trusted.
    for (const auto& entry : std::filesystem::directory_iterator(dir)) std::filesystem::resize_file(entry.path(), 40);
    SpectrumCache repaired(dir);
    CHECK(repaired.get(design)->k == first->k);

    SpectrumCache memory_only;
    CHECK(memory_only.get(design)->n == 31);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
