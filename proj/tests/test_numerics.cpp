#include "doctest.h"

#include "ndsal/error.hpp"
#include "ndsal/harness.hpp"
#include "ndsal/numerics.hpp"
#include "ndsal/rng.hpp"
#include "oracles/naive.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace ndsal;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (double& v : m.data()) v = g(rng);
    return m;
}

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
    Matrix m = random_matrix(n, n, seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) m(j, i) = m(i, j);
    }
    return m;
}

}  // namespace

TEST_CASE("feature matrix validation") {
    CHECK_THROWS_AS(FeatureMatrix(Matrix(0, 3)), InvalidArgument);
    CHECK_THROWS_AS(FeatureMatrix(Matrix(2, 2), {1, 1}), InvalidArgument);
    Matrix bad(3, 2);
    bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        FeatureMatrix f(bad);
        FAIL("accepted a NaN");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    const FeatureMatrix f(random_matrix(4, 2, 1), {10, 20, 30, 40});
    const std::vector<SampleId> pick{30, 10};
    const FeatureMatrix s = f.subset_by_id(pick);
    CHECK(s.ids() == pick);
    CHECK(s.row(0)[0] == f.row(2)[0]);
    CHECK_THROWS_AS(f.index_of(99), InvalidArgument);
}

TEST_CASE("pairwise distances") {
    SUBCASE("3-4-5 triangle") {
        const DistanceMatrix d = pairwise_distances(Matrix(2, 2, {0.0, 0.0, 3.0, 4.0}));
        CHECK(d.values(0, 1) == 5.0);
        CHECK(d.values(1, 0) == 5.0);
        CHECK(d.values(0, 0) == 0.0);
    }
    SUBCASE("identical rows") {
        const DistanceMatrix d = pairwise_distances(Matrix(2, 3, {1, 2, 3, 1, 2, 3}));
        CHECK(d.values(0, 1) == 0.0);
    }
    SUBCASE("matches the naive double loop") {
        const Matrix x = random_matrix(10, 7, 11);
        std::vector<std::vector<double>> points(10);
        for (std::size_t i = 0; i < 10; ++i) points[i].assign(x.row(i).begin(), x.row(i).end());
        const auto expected = oracle::distances(points);
        const DistanceMatrix d = pairwise_distances(x);
        for (std::size_t i = 0; i < 10; ++i) {
            for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(d.values(i, j) - expected[i][j]) <= 1e-9);
        }
    }
    SUBCASE("triangle inequality on random triples") {
        const DistanceMatrix d = pairwise_distances(random_matrix(30, 5, 12));
        Rng rng(13);
        std::uniform_int_distribution<std::size_t> pick(0, 29);
        for (int t = 0; t < 2000; ++t) {
            const auto i = pick(rng), j = pick(rng), k = pick(rng);
            CHECK(d.values(i, k) <= d.values(i, j) + d.values(j, k) + 1e-9);
        }
    }
    SUBCASE("non-finite input names the row") {
        Matrix x = random_matrix(5, 2, 14);
        x(3, 0) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_WITH_AS(pairwise_distances(x), doctest::Contains("row 3"), InvalidArgument);
    }
}

TEST_CASE("gaussian affinity") {
    SUBCASE("zero distance gives affinity 1") {
        const AffinityMatrix a = to_affinity(DistanceMatrix{Matrix(2, 2, {0, 0, 0, 0})}, 1.0);
        CHECK(a.values(0, 1) == 1.0);
        CHECK(a.values(0, 0) == 0.0);
    }
    SUBCASE("distance sigma*sqrt(2) gives exp(-1)") {
        const double sigma = 1.7;
        const double dist = sigma * std::sqrt(2.0);
        const AffinityMatrix a = to_affinity(DistanceMatrix{Matrix(2, 2, {0, dist, dist, 0})}, sigma);
        CHECK(a.values(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
        CHECK(a.values(0, 1) == doctest::Approx(0.3679).epsilon(1e-4));
    }
    SUBCASE("AUTO bandwidth is the median distance") {
        const DistanceMatrix d{Matrix(3, 3, {0, 1, 2, 1, 0, 3, 2, 3, 0})};
        CHECK(to_affinity(d).bandwidth == 2.0);
        CHECK(median_off_diagonal(Matrix(4, 4, {0, 1, 2, 3, 1, 0, 4, 5, 2, 4, 0, 6, 3, 5, 6, 0})) == 3.5);
    }
    SUBCASE("AUTO with all distances zero is rejected") {
        CHECK_THROWS_AS(to_affinity(DistanceMatrix{Matrix(3, 3)}), InvalidArgument);
    }
    SUBCASE("monotone decreasing in distance") {
        const DistanceMatrix d = pairwise_distances(random_matrix(25, 3, 15));
        const AffinityMatrix a = to_affinity(d);
        for (std::size_t i = 0; i < 25; ++i) {
            for (std::size_t j = 0; j < 25; ++j) {
                for (std::size_t p = 0; p < 25; ++p) {
                    const std::size_t q = (p + 7) % 25;
                    if (i == j || p == q) continue;
                    if (d.values(i, j) < d.values(p, q)) CHECK(a.values(i, j) >= a.values(p, q));
                }
            }
        }
    }
}

TEST_CASE("jacobi eigensolver") {
    SUBCASE("identity") {
        const EigenResult r = sym_eigen(Matrix::identity(3), 3);
        CHECK(r.values == std::vector<double>{1.0, 1.0, 1.0});
    }
    SUBCASE("diagonal matrix gives axis-aligned vectors") {
        Matrix a(3, 3);
        a(0, 0) = 3.0;
        a(1, 1) = 1.0;
        a(2, 2) = 2.0;
        const EigenResult r = sym_eigen(a, 2);
        REQUIRE(r.values.size() == 2);
        CHECK(r.values[0] == 1.0);
        CHECK(r.values[1] == 2.0);
        CHECK(std::abs(r.vectors(1, 0)) == 1.0);
        CHECK(std::abs(r.vectors(2, 1)) == 1.0);
        CHECK(r.vectors(0, 0) == 0.0);
    }
    SUBCASE("random symmetric: residuals, orthonormality, trace") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const std::size_t n = 8;
            const Matrix a = random_symmetric(n, 100 + seed);
            const EigenResult r = sym_eigen(a, n);
            double trace = 0.0, sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
            for (std::size_t j = 0; j < n; ++j) {
                sum += r.values[j];
                if (j > 0) CHECK(r.values[j - 1] <= r.values[j]);
                for (std::size_t i = 0; i < n; ++i) {
                    double av = 0.0;
                    for (std::size_t c = 0; c < n; ++c) av += a(i, c) * r.vectors(c, j);
                    CHECK(std::abs(av - r.values[j] * r.vectors(i, j)) < 1e-6);
                }
                for (std::size_t l = 0; l < n; ++l) {
                    double g = 0.0;
                    for (std::size_t i = 0; i < n; ++i) g += r.vectors(i, j) * r.vectors(i, l);
                    CHECK(std::abs(g - (j == l ? 1.0 : 0.0)) < 1e-6);
                }
            }
            CHECK(std::abs(sum - trace) < 1e-5);
        }
    }
    SUBCASE("rejects bad requests") {
        CHECK_THROWS_AS(sym_eigen(Matrix::identity(3), 4), InvalidArgument);
        CHECK_THROWS_AS(sym_eigen(Matrix::identity(3), 0), InvalidArgument);
        Matrix asym = Matrix::identity(3);
        asym(0, 1) = 1.0;
        CHECK_THROWS_AS(sym_eigen(asym, 3), InvalidArgument);
    }
    SUBCASE("sweep cap reports the residual") {
        try {
            sym_eigen(random_symmetric(12, 7), 12, {1e-10, 1});
            FAIL("one sweep should not converge");
        } catch (const ConvergenceError& e) {
            CHECK(e.residual() > 1e-10);
        }
    }
}

TEST_CASE("k-means") {
    SUBCASE("two separated 1-D groups") {
        const KMeansResult r = kmeans(Matrix(4, 1, {0.0, 10.0, 0.1, 10.1}), 2, 5);
        CHECK(r.labels[0] == r.labels[2]);
        CHECK(r.labels[1] == r.labels[3]);
        CHECK(r.labels[0] != r.labels[1]);
        CHECK(r.converged);
    }
    SUBCASE("K = 1") {
        const KMeansResult r = kmeans(random_matrix(10, 2, 3), 1, 0);
        for (int l : r.labels) CHECK(l == 0);
    }
    SUBCASE("K > n rejected") { CHECK_THROWS_AS(kmeans(random_matrix(3, 2, 3), 4, 0), InvalidArgument); }
    SUBCASE("three blobs match the generator up to permutation") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SyntheticSpec spec;
            spec.counts = {20, 20, 20};
            spec.dim = 2;
            spec.spread = 0.5;
            spec.min_center_distance = 10 * spec.spread;
            spec.seed = seed;
            const Dataset data = generate_synthetic(spec);
            const KMeansResult r = kmeans(data.features.values(), 3, seed);
            CHECK(oracle::best_permutation_agreement(r.labels, data.labels, 3) == 1.0);
        }
    }
    SUBCASE("objective is non-increasing, every cluster populated") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const KMeansResult r = kmeans(random_matrix(80, 3, 40 + seed), 5, seed);
            for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
                CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-12);
            }
            std::vector<int> sizes(5, 0);
            for (int l : r.labels) ++sizes[static_cast<std::size_t>(l)];
            for (int s : sizes) CHECK(s > 0);
        }
    }
    SUBCASE("deterministic given seed") {
        const Matrix x = random_matrix(50, 2, 9);
        CHECK(kmeans(x, 4, 77).labels == kmeans(x, 4, 77).labels);
    }
}
