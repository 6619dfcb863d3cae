#pragma once

#include <cstddef>

namespace vigil {

// Process-wide worker count for the OpenMP kernels (LOF distance rows,
// forest scoring, GBT split scans, per-subject study evaluation).
// 0 means "let OpenMP decide". Every kernel computes per-item results
// independently and combines them in a fixed serial order, so results are
// identical for every worker count.
void set_max_threads(int n);
int max_threads();

// True when the build has OpenMP and more than one worker is requested.
bool parallel_enabled();

// parallel_for(n, fn) runs fn(i) for i in [0, n), spreading iterations
// across workers when allowed. fn must not touch shared mutable state
// except its own output slot.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn);

namespace detail {
void run_parallel(std::ptrdiff_t n, void (*trampoline)(void*, std::ptrdiff_t), void* ctx);
}

template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
    if (n <= 0) return;
    auto trampoline = [](void* ctx, std::ptrdiff_t i) { (*static_cast<Fn*>(ctx))(i); };
    detail::run_parallel(n, trampoline, &fn);
}

} // namespace vigil
