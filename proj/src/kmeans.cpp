#include "ndsal/error.hpp"
#include "ndsal/numerics.hpp"
#include "ndsal/rng.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace ndsal {

int nearest_centroid(std::span<const double> point, const Matrix& centroids) {
    const auto& k = simd::kernels();
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double dist = k.squared_distance(point.data(), centroids.row(c).data(), point.size());
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(c);
        }
    }
    return best;
}

namespace {

Matrix plus_plus_seeding(const Matrix& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const auto& kern = simd::kernels();
    Matrix centroids(k, d);

    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::ranges::copy(x.row(first(rng)), centroids.row(0).begin());

    std::vector<double> closest(n);
    for (std::size_t i = 0; i < n; ++i) {
        closest[i] = kern.squared_distance(x.row(i).data(), centroids.row(0).data(), d);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : closest) total += v;
        std::size_t chosen = n - 1;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double running = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                running += closest[i];
                if (running > target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // Every point coincides with a chosen centroid.
            chosen = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
        std::ranges::copy(x.row(chosen), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) {
            closest[i] = std::min(closest[i], kern.squared_distance(x.row(i).data(), centroids.row(c).data(), d));
        }
    }
    return centroids;
}

double assign(const Matrix& x, const Matrix& centroids, std::vector<int>& labels, std::vector<double>& cost) {
    const auto& kern = simd::kernels();
    double objective = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double dist = kern.squared_distance(x.row(i).data(), centroids.row(c).data(), x.cols());
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(c);
            }
        }
        labels[i] = best;
        cost[i] = best_dist;
        objective += best_dist;
    }
    return objective;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (k < 1) throw InvalidArgument("kmeans: k must be at least 1");
    if (k > n) {
        throw InvalidArgument("kmeans: k=" + std::to_string(k) + " exceeds point count " + std::to_string(n));
    }
    require_finite(x);

    Rng rng(seed);
    KMeansResult result;
    result.centroids = plus_plus_seeding(x, k, rng);
    result.labels.assign(n, -1);
    std::vector<int> labels(n, 0);
    std::vector<double> cost(n, 0.0);
    std::vector<std::size_t> counts(k);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double objective = assign(x, result.centroids, labels, cost);

        // Re-seed empty clusters at the point farthest from its centroid.
        std::ranges::fill(counts, 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i) {
                const bool donor_ok = counts[static_cast<std::size_t>(labels[i])] > 1;
                const bool far_ok = counts[static_cast<std::size_t>(labels[far])] > 1;
                if (donor_ok && (!far_ok || cost[i] > cost[far])) far = i;
            }
            --counts[static_cast<std::size_t>(labels[far])];
            ++counts[c];
            objective -= cost[far];
            cost[far] = 0.0;
            labels[far] = static_cast<int>(c);
            std::ranges::copy(x.row(far), result.centroids.row(c).begin());
        }
        result.objective_history.push_back(objective);
        result.iterations = iter + 1;

        if (labels == result.labels) {
            result.converged = true;
            break;
        }
        result.labels = labels;

        Matrix sums(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            simd::axpy(1.0, x.row(i).data(), sums.row(static_cast<std::size_t>(labels[i])).data(), d);
        }
        for (std::size_t c = 0; c < k; ++c) {
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (std::size_t j = 0; j < d; ++j) result.centroids(c, j) = sums(c, j) * inv;
        }
    }
    return result;
}

}  // namespace ndsal
