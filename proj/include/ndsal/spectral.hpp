#pragma once

#include "ndsal/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ndsal {

struct ClusterAssignment {
    std::size_t k = 0;
    std::vector<int> labels;                    // aligned with the input rows
    std::vector<std::vector<SampleId>> members; // per cluster, ascending ids
    bool eigen_converged = true;
};

struct SpectralOptions {
    // Up to this many points the Laplacian is diagonalized densely with
    // Jacobi; larger inputs use restarted block Krylov iteration for the k
    // leading eigenvectors of D^-1/2 A D^-1/2.
    std::size_t dense_limit = 256;
    double residual_tolerance = 1e-8;  // per Ritz pair, ||S v - theta v||
    std::size_t krylov_block_steps = 8;
    int max_restarts = 100;
    // Gaussian kernel width; the median pairwise distance when unset.
    std::optional<double> bandwidth;
};

// L = I - D^-1/2 A D^-1/2. Rows of isolated vertices (zero degree) are rows
// of the identity.
Matrix normalized_laplacian(const AffinityMatrix& affinity);

struct SpectralEmbedding {
    Matrix vectors;                  // n x k eigenvectors of L, smallest eigenvalues first
    std::vector<double> eigenvalues; // ascending, eigenvalues of L
    std::vector<bool> isolated;      // zero-degree vertices
    bool converged = true;
};

SpectralEmbedding laplacian_embedding(const AffinityMatrix& affinity, std::size_t k,
                                      const SpectralOptions& options = {});

// Normalized spectral clustering: Gaussian affinity with median bandwidth,
// symmetric normalized Laplacian, row-normalized k-dimensional embedding,
// then k-means. Rows are processed in ascending id order so results do not
// depend on input order; cluster indices are numbered by smallest member id.
ClusterAssignment spectral_cluster(const FeatureMatrix& x, std::size_t k, std::uint64_t seed,
                                   const SpectralOptions& options = {});

// Groups row labels into a ClusterAssignment (members sorted by id).
ClusterAssignment make_assignment(const FeatureMatrix& x, std::span<const int> labels, std::size_t k);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace ndsal
