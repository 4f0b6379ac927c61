// Quick throughput probe for the GEMM kernels at the shapes the separator
// actually uses. Not part of the test suite.

#include <chrono>
#include <cstdio>
#include <vector>

#include "contsep/kernels.hpp"
#include "contsep/rng.hpp"

using namespace contsep;

int main() {
    Rng rng(1);
    struct Shape {
        std::size_t m, n, k;
    };
    // Representative band/frame/channel mixes at desk scale, batch 8.
    const Shape shapes[] = {
        {32, 1024, 64},   // band mix, stage 1, batched
        {512, 64, 128},   // frame mix, stage 1
        {2048, 128, 64},  // frame up, last decoder stage
        {4096, 32, 32},   // token projection
        {32, 4096, 64},   {64, 64, 64}, {256, 256, 256},
    };
    for (const auto backend : kernels::available_backends()) {
        const auto& t = kernels::table_for(backend);
        std::printf("backend %s\n", t.name);
        for (const auto& s : shapes) {
            std::vector<double> a(s.m * s.k), b(s.k * s.n), c(s.m * s.n, 0.0);
            for (auto& x : a) x = rng.uniform(-1, 1);
            for (auto& x : b) x = rng.uniform(-1, 1);
            const double flops = 2.0 * s.m * s.n * s.k;
            int reps = static_cast<int>(2e8 / flops) + 1;
            const auto t0 = std::chrono::steady_clock::now();
            for (int r = 0; r < reps; ++r)
                t.gemm_nn(a.data(), b.data(), c.data(), s.m, s.n, s.k, false);
            const auto t1 = std::chrono::steady_clock::now();
            const double sec = std::chrono::duration<double>(t1 - t0).count();
            std::printf("  gemm_nn %4zu x %4zu x %4zu : %7.2f GFLOP/s\n", s.m, s.n, s.k,
                        flops * reps / sec / 1e9);
        }
    }
    return 0;
}
