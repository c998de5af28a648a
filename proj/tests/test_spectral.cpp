#include "doctest.h"

#include "ndsal/error.hpp"
#include "ndsal/harness.hpp"
#include "ndsal/rng.hpp"
#include "ndsal/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace ndsal;

namespace {

Dataset blobs(std::vector<std::size_t> counts, std::size_t dim, double spread, double min_distance,
              std::uint64_t seed) {
    SyntheticSpec spec;
    spec.counts = std::move(counts);
    spec.dim = dim;
    spec.spread = spread;
    spec.min_center_distance = min_distance;
    spec.seed = seed;
    return generate_synthetic(spec);
}

// Two noisy concentric circles; label 0 inside.
Dataset rings(std::size_t per_ring, double inner, double outer, double noise, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, noise);
    Matrix x(2 * per_ring, 2);
    std::vector<ClassLabel> y(2 * per_ring);
    for (std::size_t i = 0; i < 2 * per_ring; ++i) {
        const bool outside = i >= per_ring;
        const double r = (outside ? outer : inner) + jitter(rng);
        const double t = angle(rng);
        x(i, 0) = r * std::cos(t);
        x(i, 1) = r * std::sin(t);
        y[i] = outside ? 1 : 0;
    }
    return {FeatureMatrix(std::move(x)), std::move(y), 2, {"inner", "outer"}};
}

}  // namespace

TEST_CASE("adjusted rand index") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index(a, std::vector<int>{2, 2, 0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}) == doctest::Approx(-0.5));
}

TEST_CASE("four well-separated blobs are recovered exactly") {
    const Dataset data = blobs({50, 50, 50, 50}, 2, 0.3, 3.0, 4);
    const ClusterAssignment a = spectral_cluster(data.features, 4, 1);
    CHECK(adjusted_rand_index(a.labels, data.labels) == doctest::Approx(1.0));
    CHECK(a.k == 4);
    std::size_t total = 0;
    for (const auto& m : a.members) {
        CHECK(!m.empty());
        CHECK(std::ranges::is_sorted(m));
        total += m.size();
    }
    CHECK(total == 200);
}

TEST_CASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(spectral_cluster(FeatureMatrix(Matrix(5, 2, 1.0)), 2, 0), InvalidArgument);
    CHECK_THROWS_AS(spectral_cluster(FeatureMatrix(Matrix(2, 2, {0, 0, 1, 1})), 3, 0), InvalidArgument);
}

TEST_CASE("concentric rings beat plain k-means") {
    // The median distance is on the scale of the outer ring, far wider than
    // the gap, so rings need an explicit bandwidth.
    const Dataset data = rings(100, 1.0, 10.0, 0.1, 3);
    SpectralOptions options;
    options.bandwidth = 1.0;
    const ClusterAssignment a = spectral_cluster(data.features, 2, 5, options);
    const KMeansResult km = kmeans(data.features.values(), 2, 5);
    const double spectral_ari = adjusted_rand_index(a.labels, data.labels);
    const double kmeans_ari = adjusted_rand_index(km.labels, data.labels);
    CHECK(spectral_ari >= 0.9);
    CHECK(spectral_ari > kmeans_ari);
}

TEST_CASE("permuting rows permutes labels") {
    const Dataset data = blobs({30, 25, 20}, 3, 1.0, 4.0, 8);
    const FeatureMatrix& x = data.features;
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), Rng(99));
    const FeatureMatrix shuffled = x.subset(order);
    const ClusterAssignment a = spectral_cluster(x, 3, 7);
    const ClusterAssignment b = spectral_cluster(shuffled, 3, 7);
    for (std::size_t r = 0; r < order.size(); ++r) CHECK(b.labels[r] == a.labels[order[r]]);
    CHECK(a.members == b.members);
    CHECK(spectral_cluster(x, 3, 7).labels == a.labels);
}

TEST_CASE("laplacian spectrum lies in [0, 2]") {
    const Dataset data = blobs({15, 15, 10}, 4, 1.0, 3.0, 2);
    const AffinityMatrix aff = to_affinity(pairwise_distances(data.features));
    const EigenResult eig = sym_eigen(normalized_laplacian(aff), 40);
    for (double v : eig.values) {
        CHECK(v >= -1e-6);
        CHECK(v <= 2.0 + 1e-6);
    }
    CHECK(std::abs(eig.values[0]) < 1e-9);
}

TEST_CASE("isolated vertices join by nearest centroid") {
    // The far point underflows every Gaussian affinity to zero.
    Matrix x(21, 1);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = 0.01 * static_cast<double>(i);
    for (std::size_t i = 10; i < 20; ++i) x(i, 0) = 1.0 + 0.01 * static_cast<double>(i);
    x(20, 0) = 1e6;
    const ClusterAssignment a = spectral_cluster(FeatureMatrix(x), 2, 3);
    std::size_t total = 0;
    for (const auto& m : a.members) total += m.size();
    CHECK(total == 21);
    CHECK(a.labels[20] >= 0);
}

TEST_CASE("krylov embedding agrees with the dense solver") {
    const Dataset data = blobs({60, 50, 40, 30}, 6, 1.0, 5.0, 21);
    const AffinityMatrix aff = to_affinity(pairwise_distances(data.features));
    SpectralOptions dense;
    dense.dense_limit = 1000;
    SpectralOptions iterative;
    iterative.dense_limit = 0;
    const SpectralEmbedding a = laplacian_embedding(aff, 4, dense);
    const SpectralEmbedding b = laplacian_embedding(aff, 4, iterative);
    CHECK(b.converged);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(a.eigenvalues[j] - b.eigenvalues[j]) < 1e-8);
        // Same vector up to sign.
        double dot = 0.0;
        for (std::size_t i = 0; i < aff.size(); ++i) dot += a.vectors(i, j) * b.vectors(i, j);
        CHECK(std::abs(std::abs(dot) - 1.0) < 1e-6);
    }
    SpectralOptions big_dense = dense, big_iter = iterative;
    CHECK(spectral_cluster(data.features, 4, 2, big_dense).labels ==
          spectral_cluster(data.features, 4, 2, big_iter).labels);
}

TEST_CASE("krylov embedding resolves repeated eigenvalues") {
    // Three disconnected components: eigenvalue 0 has multiplicity 3.
    Matrix a(90, 90);
    for (std::size_t i = 0; i < 90; ++i) {
        for (std::size_t j = 0; j < 90; ++j) {
            if (i != j && i / 30 == j / 30) a(i, j) = 0.5 + 0.25 * std::cos(static_cast<double>(i * j));
        }
    }
    SpectralOptions iterative;
    iterative.dense_limit = 0;
    const SpectralEmbedding e = laplacian_embedding(AffinityMatrix{a, 1.0}, 3, iterative);
    CHECK(e.converged);
    for (double v : e.eigenvalues) CHECK(std::abs(v) < 1e-8);
}
