#include "ndsal/spectral.hpp"

#include "ndsal/error.hpp"
#include "ndsal/rng.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace ndsal {

Matrix normalized_laplacian(const AffinityMatrix& affinity) {
    const std::size_t n = affinity.size();
    std::vector<double> inv_sqrt_degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 0.0;
        for (double v : affinity.values.row(i)) degree += v;
        if (degree > 0.0) inv_sqrt_degree[i] = 1.0 / std::sqrt(degree);
    }
    Matrix lap(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        lap(i, i) = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            lap(i, j) = -inv_sqrt_degree[i] * affinity.values(i, j) * inv_sqrt_degree[j];
        }
    }
    return lap;
}

namespace {

// w_j = S q_j for rows [first, last) of q. Rows of S are visited once each
// so a row stays cached while it meets every vector of the block.
void apply_block(const Matrix& s, const Matrix& q, Matrix& w, std::size_t first, std::size_t last) {
    const std::size_t n = s.rows();
    const auto& kern = simd::kernels();
    for (std::size_t i = 0; i < n; ++i) {
        const double* si = s.row(i).data();
        for (std::size_t j = first; j < last; ++j) w(j, i) = kern.dot(si, q.row(j).data(), n);
    }
}

// Orthonormalizes rows [first, last) of `v` against all earlier rows, with a
// second Gram-Schmidt pass for stability. Collapsed rows (an invariant
// subspace was reached) are replaced by a fresh random direction.
void extend_basis(Matrix& v, std::size_t first, std::size_t last, Rng& rng) {
    const std::size_t n = v.cols();
    const auto& kern = simd::kernels();
    std::normal_distribution<double> gauss;
    for (std::size_t r = first; r < last; ++r) {
        double* vr = v.row(r).data();
        const double original = std::sqrt(kern.dot(vr, vr, n));
        for (int attempt = 0; attempt < 4; ++attempt) {
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t q = 0; q < r; ++q) kern.axpy(-kern.dot(v.row(q).data(), vr, n), v.row(q).data(), vr, n);
            }
            const double norm = std::sqrt(kern.dot(vr, vr, n));
            if (norm > 1e-10 * std::max(1.0, original)) {
                for (std::size_t i = 0; i < n; ++i) vr[i] /= norm;
                break;
            }
            for (std::size_t i = 0; i < n; ++i) vr[i] = gauss(rng);
        }
    }
}

// Leading eigenpairs of S = D^-1/2 A D^-1/2 by restarted block Krylov
// iteration: each cycle builds span{V, SV, S^2 V, ...} with block size p > k,
// extracts Ritz pairs, and restarts from the p best Ritz vectors. The block
// form keeps repeated eigenvalues (disconnected components) resolvable.
SpectralEmbedding krylov_embedding(const Matrix& s, std::size_t k, const SpectralOptions& options,
                                   std::vector<bool> isolated) {
    const std::size_t n = s.rows();
    const std::size_t p = std::min(n, k + std::max<std::size_t>(4, k));
    const std::size_t steps = std::clamp<std::size_t>(n / p, 1, std::max<std::size_t>(2, options.krylov_block_steps));
    const std::size_t max_dim = p * steps;
    const auto& kern = simd::kernels();

    Rng rng(0x5eed'ba5eULL + n);
    std::normal_distribution<double> gauss;
    Matrix q(max_dim, n), w(max_dim, n);
    for (std::size_t r = 0; r < p; ++r) {
        for (double& x : q.row(r)) x = gauss(rng);
    }
    extend_basis(q, 0, p, rng);

    std::vector<double> ritz_values(k, 0.0);
    Matrix ritz(p, n);
    bool converged = false;
    for (int restart = 0; restart < options.max_restarts && !converged; ++restart) {
        apply_block(s, q, w, 0, p);
        for (std::size_t dim = p; dim < max_dim; dim += p) {
            for (std::size_t r = 0; r < p; ++r) std::ranges::copy(w.row(dim - p + r), q.row(dim + r).begin());
            extend_basis(q, dim, dim + p, rng);
            apply_block(s, q, w, dim, dim + p);
        }

        Matrix projected(max_dim, max_dim);
        for (std::size_t a = 0; a < max_dim; ++a) {
            for (std::size_t b = a; b < max_dim; ++b) {
                const double h = 0.5 * (kern.dot(q.row(a).data(), w.row(b).data(), n) +
                                        kern.dot(q.row(b).data(), w.row(a).data(), n));
                projected(a, b) = projected(b, a) = h;
            }
        }
        const EigenResult small = sym_eigen(projected, max_dim);

        double worst_residual = 0.0;
        std::vector<double> mapped(n);
        for (std::size_t j = 0; j < p; ++j) {
            const std::size_t src = max_dim - 1 - j;  // descending Ritz values
            std::ranges::fill(ritz.row(j), 0.0);
            std::ranges::fill(mapped, 0.0);
            for (std::size_t a = 0; a < max_dim; ++a) {
                const double c = small.vectors(a, src);
                kern.axpy(c, q.row(a).data(), ritz.row(j).data(), n);
                if (j < k) kern.axpy(c, w.row(a).data(), mapped.data(), n);
            }
            if (j < k) {
                ritz_values[j] = small.values[src];
                double res = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double r = mapped[i] - ritz_values[j] * ritz(j, i);
                    res += r * r;
                }
                worst_residual = std::max(worst_residual, std::sqrt(res));
            }
        }
        converged = worst_residual < options.residual_tolerance;
        for (std::size_t r = 0; r < p; ++r) std::ranges::copy(ritz.row(r), q.row(r).begin());
        extend_basis(q, 0, p, rng);
    }

    SpectralEmbedding out;
    out.vectors = Matrix(n, k);
    out.eigenvalues.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        out.eigenvalues[j] = 1.0 - ritz_values[j];  // eig(L) = 1 - eig(S)
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = ritz(j, i);
    }
    out.isolated = std::move(isolated);
    out.converged = converged;
    return out;
}

}  // namespace

SpectralEmbedding laplacian_embedding(const AffinityMatrix& affinity, std::size_t k, const SpectralOptions& options) {
    const std::size_t n = affinity.size();
    if (k < 1 || k > n) throw InvalidArgument("laplacian_embedding: k outside [1, n]");
    std::vector<bool> isolated(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 0.0;
        for (double v : affinity.values.row(i)) degree += v;
        isolated[i] = !(degree > 0.0);
    }

    Matrix lap = normalized_laplacian(affinity);
    if (n <= options.dense_limit || k + 4 >= n) {
        EigenResult eig = sym_eigen(lap, k);
        return {std::move(eig.vectors), std::move(eig.values), std::move(isolated), true};
    }
    // S = I - L
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) lap(i, j) = (i == j ? 1.0 : 0.0) - lap(i, j);
    }
    return krylov_embedding(lap, k, options, std::move(isolated));
}

ClusterAssignment make_assignment(const FeatureMatrix& x, std::span<const int> labels, std::size_t k) {
    if (labels.size() != x.rows()) throw InvalidArgument("label count does not match row count");
    ClusterAssignment out;
    out.k = k;
    out.labels.assign(labels.begin(), labels.end());
    out.members.assign(k, {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
            throw InvalidArgument("cluster label out of range at row " + std::to_string(i));
        }
        out.members[static_cast<std::size_t>(labels[i])].push_back(x.id(i));
    }
    for (auto& m : out.members) std::ranges::sort(m);
    return out;
}

ClusterAssignment spectral_cluster(const FeatureMatrix& x, std::size_t k, std::uint64_t seed,
                                   const SpectralOptions& options) {
    const std::size_t n = x.rows();
    if (k < 2) throw InvalidArgument("spectral_cluster: k must be at least 2");
    if (n < k) {
        throw InvalidArgument("spectral_cluster: " + std::to_string(n) + " points cannot form " +
                              std::to_string(k) + " clusters");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return x.id(a) < x.id(b); });
    const FeatureMatrix sorted = x.subset(order);

    const AffinityMatrix affinity = to_affinity(pairwise_distances(sorted), options.bandwidth);
    SpectralEmbedding embedding = laplacian_embedding(affinity, k, options);

    // Row-normalize; rows without a usable direction join by nearest centroid.
    std::vector<std::size_t> usable;
    usable.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = embedding.vectors.row(i);
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        if (embedding.isolated[i] || norm < 1e-12) continue;
        for (double& v : row) v /= norm;
        usable.push_back(i);
    }
    if (usable.size() < k) {
        usable.resize(n);
        std::iota(usable.begin(), usable.end(), std::size_t{0});
    }

    Matrix points(usable.size(), k);
    for (std::size_t r = 0; r < usable.size(); ++r) {
        std::ranges::copy(embedding.vectors.row(usable[r]), points.row(r).begin());
    }
    const KMeansResult km = kmeans(points, k, seed);

    std::vector<int> raw(n, -1);
    for (std::size_t r = 0; r < usable.size(); ++r) raw[usable[r]] = km.labels[r];
    for (std::size_t i = 0; i < n; ++i) {
        if (raw[i] < 0) raw[i] = nearest_centroid(embedding.vectors.row(i), km.centroids);
    }

    // Canonical numbering: clusters ordered by their smallest member id.
    std::vector<int> rename(k, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& slot = rename[static_cast<std::size_t>(raw[i])];
        if (slot < 0) slot = next++;
    }
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[order[i]] = rename[static_cast<std::size_t>(raw[i])];

    ClusterAssignment out = make_assignment(x, labels, k);
    out.eigen_converged = embedding.converged;
    return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw InvalidArgument("adjusted_rand_index: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows;
    std::map<int, double> cols;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [_, c] : joint) index += pairs(c);
    double sum_rows = 0.0;
    for (const auto& [_, c] : rows) sum_rows += pairs(c);
    double sum_cols = 0.0;
    for (const auto& [_, c] : cols) sum_cols += pairs(c);
    const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (index - expected) / (max_index - expected);
}

}  // namespace ndsal
