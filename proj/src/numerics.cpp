#include "ndsal/numerics.hpp"

#include "ndsal/error.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace ndsal {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw InvalidArgument("matrix data size " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void require_finite(const Matrix& x) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (double v : x.row(r)) {
            if (!std::isfinite(v)) {
                throw InvalidArgument("non-finite value in row " + std::to_string(r));
            }
        }
    }
}

namespace {
std::vector<SampleId> sequential_ids(std::size_t n) {
    std::vector<SampleId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<SampleId>(i);
    return ids;
}
}  // namespace

FeatureMatrix::FeatureMatrix(Matrix values, std::vector<SampleId> ids)
    : values_(std::move(values)), ids_(std::move(ids)) {
    validate();
}

void FeatureMatrix::validate() const {
    if (values_.rows() == 0 || values_.cols() == 0) {
        throw InvalidArgument("feature matrix must have at least one row and one column");
    }
    if (ids_.size() != values_.rows()) {
        throw InvalidArgument("feature matrix has " + std::to_string(values_.rows()) + " rows but " +
                              std::to_string(ids_.size()) + " ids");
    }
    require_finite(values_);
    std::unordered_set<SampleId> seen;
    seen.reserve(ids_.size());
    for (SampleId id : ids_) {
        if (!seen.insert(id).second) throw InvalidArgument("duplicate sample id " + std::to_string(id));
    }
}

FeatureMatrix::FeatureMatrix(Matrix values)
    : values_(std::move(values)), ids_(sequential_ids(values_.rows())) {
    validate();
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows) const {
    Matrix out(rows.size(), dim());
    std::vector<SampleId> ids;
    ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= this->rows()) throw InvalidArgument("row index out of range: " + std::to_string(rows[i]));
        std::ranges::copy(row(rows[i]), out.row(i).begin());
        ids.push_back(ids_[rows[i]]);
    }
    return FeatureMatrix(std::move(out), std::move(ids));
}

FeatureMatrix FeatureMatrix::subset_by_id(std::span<const SampleId> ids) const {
    std::unordered_map<SampleId, std::size_t> index;
    index.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) index.emplace(ids_[i], i);
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (SampleId id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw InvalidArgument("unknown sample id " + std::to_string(id));
        rows.push_back(it->second);
    }
    return subset(rows);
}

std::size_t FeatureMatrix::index_of(SampleId id) const {
    auto it = std::ranges::find(ids_, id);
    if (it == ids_.end()) throw InvalidArgument("unknown sample id " + std::to_string(id));
    return static_cast<std::size_t>(it - ids_.begin());
}

DistanceMatrix pairwise_distances(const FeatureMatrix& x) { return pairwise_distances(x.values()); }

DistanceMatrix pairwise_distances(const Matrix& x) {
    require_finite(x);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const auto& k = simd::kernels();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row(i).data();
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dist = std::sqrt(k.squared_distance(xi, x.row(j).data(), d));
            out(i, j) = dist;
            out(j, i) = dist;
        }
    }
    return {std::move(out)};
}

double median_off_diagonal(const Matrix& d) {
    const std::size_t n = d.rows();
    if (n < 2) throw InvalidArgument("median of off-diagonal entries needs at least 2 points");
    std::vector<double> values;
    values.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) values.push_back(d(i, j));
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

AffinityMatrix to_affinity(const DistanceMatrix& d, std::optional<double> bandwidth) {
    const std::size_t n = d.size();
    double sigma = 0.0;
    if (bandwidth) {
        sigma = *bandwidth;
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw InvalidArgument("affinity bandwidth must be a positive finite value");
        }
    } else if (n >= 2) {
        sigma = median_off_diagonal(d.values);
        if (!(sigma > 0.0)) {
            throw InvalidArgument("automatic bandwidth undefined: all pairwise distances are zero");
        }
    } else {
        sigma = 1.0;  // a single point has no off-diagonal entries to scale
    }
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dist = d.values(i, j);
            const double a = std::exp(-dist * dist * inv);
            out(i, j) = a;
            out(j, i) = a;
        }
    }
    return {std::move(out), sigma};
}

}  // namespace ndsal
