#include "ndsal/error.hpp"
#include "ndsal/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace ndsal::simd {

#ifndef NDSAL_HAVE_AVX2
namespace detail {
const KernelTable* avx2_table() noexcept { return nullptr; }
}  // namespace detail
#endif

#ifndef NDSAL_HAVE_NEON
namespace detail {
const KernelTable* neon_table() noexcept { return nullptr; }
}  // namespace detail
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(NDSAL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_if_available(Backend b) noexcept {
    switch (b) {
    case Backend::scalar: return &detail::scalar_table();
    case Backend::avx2: return cpu_has_avx2() ? detail::avx2_table() : nullptr;
    case Backend::neon: return detail::neon_table();  // NEON is baseline on aarch64
    }
    return nullptr;
}

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("NDSAL_SIMD")) {
        const std::string_view name(env);
        for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
            if (name == backend_name(b)) {
                if (const KernelTable* t = table_if_available(b)) return t;
            }
        }
    }
    for (Backend b : {Backend::avx2, Backend::neon}) {
        if (const KernelTable* t = table_if_available(b)) return t;
    }
    return &detail::scalar_table();
}

std::atomic<const KernelTable*>& active() noexcept {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
    }
    return "unknown";
}

bool backend_available(Backend b) noexcept { return table_if_available(b) != nullptr; }

const KernelTable& kernels() noexcept { return *active().load(std::memory_order_acquire); }

const KernelTable& kernels_for(Backend b) {
    const KernelTable* t = table_if_available(b);
    if (t == nullptr) {
        throw InvalidArgument("simd backend not available: " + std::string(backend_name(b)));
    }
    return *t;
}

void set_backend(Backend b) { active().store(&kernels_for(b), std::memory_order_release); }

}  // namespace ndsal::simd
