#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision kernels behind a runtime-selected backend.
//
// Every backend reduces in a fixed order, so a given backend is bitwise
// deterministic. Backends differ from each other only by rounding
// (summation order), which the equivalence tests bound.

namespace ndsal::simd {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    Backend backend;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

std::string_view backend_name(Backend b) noexcept;

// True when the backend was compiled in and the host CPU supports it.
bool backend_available(Backend b) noexcept;

// Kernels currently in use. Chosen once on first use: the best available
// backend, unless the NDSAL_SIMD environment variable names another one
// ("scalar", "avx2", "neon").
const KernelTable& kernels() noexcept;

// Force a backend (tests, benchmarks). Throws InvalidArgument when the
// backend is not available on this host.
void set_backend(Backend b);

// Direct access to one backend's table, independent of the active selection.
const KernelTable& kernels_for(Backend b);

inline double dot(const double* a, const double* b, std::size_t n) {
    return kernels().dot(a, b, n);
}
inline double squared_distance(const double* a, const double* b, std::size_t n) {
    return kernels().squared_distance(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    kernels().axpy(alpha, x, y, n);
}

namespace detail {
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;  // nullptr when not compiled in
const KernelTable* neon_table() noexcept;  // nullptr when not compiled in
}  // namespace detail

}  // namespace ndsal::simd
