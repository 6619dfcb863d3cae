#include "vigil/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vigil {

namespace {
int g_max_threads = 0; // 0 = OpenMP default
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() { return g_max_threads; }

bool parallel_enabled() {
#ifdef _OPENMP
    return g_max_threads != 1;
#else
    return false;
#endif
}

namespace detail {

void run_parallel(std::ptrdiff_t n, void (*trampoline)(void*, std::ptrdiff_t), void* ctx) {
#ifdef _OPENMP
    if (g_max_threads != 1) {
        const int requested = g_max_threads;
        if (requested > 0) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(requested)
            for (std::ptrdiff_t i = 0; i < n; ++i) trampoline(ctx, i);
        } else {
#pragma omp parallel for schedule(dynamic, 1)
            for (std::ptrdiff_t i = 0; i < n; ++i) trampoline(ctx, i);
        }
        return;
    }
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) trampoline(ctx, i);
}

} // namespace detail
} // namespace vigil
