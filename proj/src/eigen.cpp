#include "ndsal/error.hpp"
#include "ndsal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ndsal {
namespace {

double off_diagonal_norm(const Matrix& a) {
    double sum = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p) {
        for (std::size_t q = p + 1; q < a.cols(); ++q) sum += a(p, q) * a(p, q);
    }
    return std::sqrt(2.0 * sum);
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double v : a.data()) sum += v * v;
    return std::sqrt(sum);
}

void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
    const double apq = a(p, q);
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const std::size_t n = a.rows();

    for (std::size_t k = 0; k < n; ++k) {
        if (k == p || k == q) continue;
        const double akp = a(k, p);
        const double akq = a(k, q);
        const double new_kp = c * akp - s * akq;
        const double new_kq = s * akp + c * akq;
        a(k, p) = a(p, k) = new_kp;
        a(k, q) = a(q, k) = new_kq;
    }
    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = a(q, p) = 0.0;

    for (std::size_t k = 0; k < n; ++k) {
        const double vkp = v(k, p);
        const double vkq = v(k, q);
        v(k, p) = c * vkp - s * vkq;
        v(k, q) = s * vkp + c * vkq;
    }
}

}  // namespace

EigenResult sym_eigen(const Matrix& input, std::size_t k, const JacobiOptions& options) {
    const std::size_t n = input.rows();
    if (n == 0 || input.cols() != n) throw InvalidArgument("sym_eigen requires a non-empty square matrix");
    if (k < 1 || k > n) {
        throw InvalidArgument("sym_eigen: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    require_finite(input);
    double max_abs = 0.0;
    for (double v : input.data()) max_abs = std::max(max_abs, std::abs(v));
    const double sym_tol = 1e-7 * std::max(1.0, max_abs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(input(i, j) - input(j, i)) > sym_tol) {
                throw InvalidArgument("sym_eigen: matrix is not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
            }
        }
    }

    // Work on the symmetrized copy so the rotations see exact symmetry.
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = input(i, i);
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
    }
    Matrix v = Matrix::identity(n);
    const double threshold = options.tolerance * std::max(1.0, frobenius_norm(a));

    int sweep = 0;
    double off = off_diagonal_norm(a);
    while (off >= threshold) {
        if (sweep == options.max_sweeps) {
            throw ConvergenceError("sym_eigen: no convergence after " + std::to_string(sweep) +
                                       " sweeps, off-diagonal norm " + std::to_string(off),
                                   off);
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) != 0.0) rotate(a, v, p, q);
            }
        }
        ++sweep;
        off = off_diagonal_norm(a);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

    EigenResult result;
    result.sweeps = sweep;
    result.values.resize(k);
    result.vectors = Matrix(n, k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t src = order[j];
        result.values[j] = a(src, src);
        // Sign convention: the largest-magnitude component is positive.
        std::size_t pivot = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (std::abs(v(i, src)) > std::abs(v(pivot, src))) pivot = i;
        }
        const double sign = v(pivot, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) result.vectors(i, j) = sign * v(i, src);
    }
    return result;
}

}  // namespace ndsal
