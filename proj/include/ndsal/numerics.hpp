#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace ndsal {

using SampleId = std::int64_t;
using ClassLabel = int;

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// n x d embedding vectors with one stable identifier per row.
// Construction validates: n >= 1, d >= 1, all values finite, ids unique.
class FeatureMatrix {
public:
    FeatureMatrix(Matrix values, std::vector<SampleId> ids);
    // Ids 0..n-1.
    explicit FeatureMatrix(Matrix values);

    std::size_t rows() const noexcept { return values_.rows(); }
    std::size_t dim() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }
    std::span<const double> row(std::size_t r) const noexcept { return values_.row(r); }
    const std::vector<SampleId>& ids() const noexcept { return ids_; }
    SampleId id(std::size_t r) const noexcept { return ids_[r]; }

    // Rows in the given order (indices into this matrix).
    FeatureMatrix subset(std::span<const std::size_t> rows) const;
    // Rows whose ids are listed, in the listed order. Throws on unknown id.
    FeatureMatrix subset_by_id(std::span<const SampleId> ids) const;
    std::size_t index_of(SampleId id) const;

private:
    void validate() const;

    Matrix values_;
    std::vector<SampleId> ids_;
};

struct DistanceMatrix {
    Matrix values;
    std::size_t size() const noexcept { return values.rows(); }
};

struct AffinityMatrix {
    Matrix values;
    double bandwidth = 0.0;
    std::size_t size() const noexcept { return values.rows(); }
};

// Throws InvalidArgument naming the first row holding a NaN or Inf.
void require_finite(const Matrix& x);

DistanceMatrix pairwise_distances(const FeatureMatrix& x);
DistanceMatrix pairwise_distances(const Matrix& x);

// Median of the strict upper triangle (mean of the two middle values when
// the count is even). Requires size >= 2.
double median_off_diagonal(const Matrix& d);

// Gaussian kernel exp(-d^2 / (2 sigma^2)) with a zero diagonal.
// std::nullopt selects sigma = median off-diagonal distance.
AffinityMatrix to_affinity(const DistanceMatrix& d, std::optional<double> bandwidth = std::nullopt);

struct EigenResult {
    std::vector<double> values;  // ascending
    Matrix vectors;              // n x k, column j pairs with values[j]
    int sweeps = 0;
};

struct JacobiOptions {
    double tolerance = 1e-10;  // off-diagonal Frobenius norm
    int max_sweeps = 100;
};

// Cyclic Jacobi eigensolver for a symmetric matrix; returns the k smallest
// eigenpairs. Throws InvalidArgument for k outside [1, n] or an asymmetric
// input, ConvergenceError (carrying the off-diagonal norm) past max_sweeps.
EigenResult sym_eigen(const Matrix& a, std::size_t k, const JacobiOptions& options = {});

struct KMeansOptions {
    int max_iterations = 300;
};

struct KMeansResult {
    std::vector<int> labels;
    Matrix centroids;
    // Sum of squared distances to the assigned centroid after each assignment step.
    std::vector<double> objective_history;
    int iterations = 0;
    bool converged = false;
};

// k-means++ seeding followed by Lloyd iterations. An empty cluster is
// re-seeded at the point farthest from its current centroid.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

// Index of the nearest centroid (lowest index on ties).
int nearest_centroid(std::span<const double> point, const Matrix& centroids);

}  // namespace ndsal
