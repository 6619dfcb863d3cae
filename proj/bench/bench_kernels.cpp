// Wall-clock comparison of the OpenMP kernels at one worker versus all
// available workers, on workloads big enough for the difference to show.
// Every kernel combines per-item results in a fixed order, so both runs
// must produce bit-identical models; the bench verifies that too.
//
//   usage: vigil_bench

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "vigil/learners/gbt.hpp"
#include "vigil/learners/iforest.hpp"
#include "vigil/learners/lof.hpp"
#include "vigil/learners/model_io.hpp"
#include "vigil/parallel.hpp"
#include "vigil/rng.hpp"

using namespace vigil;
using learners::Matrix;

namespace {

Matrix gaussian(size_t n, size_t d, uint64_t seed) {
    Rng rng = Rng::derive(seed, {Rng::label("bench.data")});
    Matrix X(n, std::vector<double>(d));
    for (auto& row : X)
        for (auto& v : row) v = rng.normal(0.0, 1.0);
    return X;
}

double timed(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-26s %9.1f ms %9.1f ms %7.2fx   %s\n", name, serial_s * 1e3, parallel_s * 1e3,
                serial_s / parallel_s, identical ? "identical" : "DIFFERENT RESULTS");
}

} // namespace

int main() {
    std::printf("%-26s %12s %12s %8s\n", "kernel", "1 worker", "all workers", "speedup");
    if (!parallel_enabled()) {
        set_max_threads(0);
        if (!parallel_enabled())
            std::printf("(built without OpenMP: both columns run the same serial path)\n");
    }

    {
        const Matrix X = gaussian(2000, 10, 1);
        learners::LofModel a, b;
        set_max_threads(1);
        const double ts = timed([&] { a = learners::train_lof(X, 10, 0.1); });
        set_max_threads(0);
        const double tp = timed([&] { b = learners::train_lof(X, 10, 0.1); });
        report("lof train n=2000", ts, tp, a == b);
    }

    {
        const Matrix X = gaussian(4096, 10, 2);
        learners::IsoForestModel a, b;
        set_max_threads(1);
        const double ts = timed([&] { a = learners::train_iforest(X, 300, 256, 0.1, 7); });
        set_max_threads(0);
        const double tp = timed([&] { b = learners::train_iforest(X, 300, 256, 0.1, 7); });
        report("iforest train n=4096", ts, tp, a == b);
    }

    {
        const Matrix X = gaussian(20000, 10, 3);
        std::vector<int> y(X.size());
        for (size_t i = 0; i < X.size(); ++i) y[i] = X[i][0] + 0.3 * X[i][1] > 0.0 ? 1 : 0;
        learners::GbtConfig cfg;
        cfg.n_rounds = 40;
        learners::GbtModel a, b;
        set_max_threads(1);
        const double ts = timed([&] { a = learners::train_gbt(X, y, cfg); });
        set_max_threads(0);
        const double tp = timed([&] { b = learners::train_gbt(X, y, cfg); });
        report("gbt train n=20000", ts, tp, a == b);
    }

    return 0;
}
