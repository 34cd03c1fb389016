#include "latdyn/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace latdyn::simd {

#if defined(LATDYN_BUILD_AVX2)
const Kernels* avx2_kernels_impl();
#endif

const Kernels* avx2_kernels() {
#if defined(LATDYN_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_kernels_impl();
#endif
    return nullptr;
}

const Kernels& active_kernels() {
    static const Kernels* chosen = [] {
        const char* force = std::getenv("LATDYN_SIMD");
        if (force && std::strcmp(force, "scalar") == 0) return &scalar_kernels();
        if (const Kernels* k = avx2_kernels()) return k;
        return &scalar_kernels();
    }();
    return *chosen;
}

}  // namespace latdyn::simd
