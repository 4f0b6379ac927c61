#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "contsep/kernels.hpp"
#include "contsep/rng.hpp"

using namespace contsep;
using kernels::Backend;
using kernels::KernelTable;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) / scale;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
    return worst;
}

// Sizes chosen to hit vector bodies and scalar tails.
const std::size_t kSizes[] = {1, 3, 4, 7, 8, 16, 31, 64, 257};

}  // namespace

TEST_CASE("simd tables match the scalar reference") {
    const KernelTable& ref = kernels::table_for(Backend::Scalar);
    for (const Backend backend : kernels::available_backends()) {
        if (backend == Backend::Scalar) continue;
        const KernelTable& simd = kernels::table_for(backend);
        CAPTURE(simd.name);
        Rng rng(2024);

        for (const std::size_t n : kSizes) {
            const auto a = random_vec(rng, n);
            auto b = random_vec(rng, n);
            for (auto& x : b) {
                if (std::fabs(x) < 1e-3) x = 1e-3;  // keep div well-conditioned
            }
            std::vector<double> out_ref(n), out_simd(n);

            // Elementwise maps must agree bitwise.
            ref.add(a.data(), b.data(), out_ref.data(), n);
            simd.add(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.sub(a.data(), b.data(), out_ref.data(), n);
            simd.sub(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.mul(a.data(), b.data(), out_ref.data(), n);
            simd.mul(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.div(a.data(), b.data(), out_ref.data(), n);
            simd.div(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));

            ref.add_vs(a.data(), 0.37, out_ref.data(), n);
            simd.add_vs(a.data(), 0.37, out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.sub_vs(a.data(), 0.37, out_ref.data(), n);
            simd.sub_vs(a.data(), 0.37, out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.sub_sv(0.37, a.data(), out_ref.data(), n);
            simd.sub_sv(0.37, a.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.mul_vs(a.data(), -1.91, out_ref.data(), n);
            simd.mul_vs(a.data(), -1.91, out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.div_sv(2.5, b.data(), out_ref.data(), n);
            simd.div_sv(2.5, b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));

            ref.vabs(a.data(), out_ref.data(), n);
            simd.vabs(a.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.vrelu(a.data(), out_ref.data(), n);
            simd.vrelu(a.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            ref.vclamp(a.data(), -0.5, 0.5, out_ref.data(), n);
            simd.vclamp(a.data(), -0.5, 0.5, out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));

            // FMA-based updates: scalar spells out std::fma, so bitwise too.
            out_ref = b;
            out_simd = b;
            ref.axpy(1.7, a.data(), out_ref.data(), n);
            simd.axpy(1.7, a.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            out_ref = b;
            out_simd = b;
            ref.fmadd(a.data(), b.data(), out_ref.data(), n);
            simd.fmadd(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            out_ref = b;
            out_simd = b;
            ref.relu_bwd(a.data(), b.data(), out_ref.data(), n);
            simd.relu_bwd(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));
            out_ref = b;
            out_simd = b;
            ref.abs_bwd(a.data(), b.data(), out_ref.data(), n);
            simd.abs_bwd(a.data(), b.data(), out_simd.data(), n);
            CHECK(bitwise_equal(out_ref, out_simd));

            // Reductions re-associate; compare to tolerance. max is exact.
            CHECK(rel_err(ref.dot(a.data(), b.data(), n), simd.dot(a.data(), b.data(), n)) < 1e-13);
            CHECK(rel_err(ref.sum(a.data(), n), simd.sum(a.data(), n)) < 1e-13);
            CHECK(rel_err(ref.sum_abs(a.data(), n), simd.sum_abs(a.data(), n)) < 1e-13);
            CHECK(ref.vmax(a.data(), n) == simd.vmax(a.data(), n));
        }
    }
}

TEST_CASE("scalar gemm_nn matches the naive triple loop") {
    Rng rng(7);
    const KernelTable& ref = kernels::table_for(Backend::Scalar);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 1 + rng.below(9);
        const std::size_t n = 1 + rng.below(17);
        const std::size_t k = 1 + rng.below(13);
        const auto a = random_vec(rng, m * k);
        const auto b = random_vec(rng, k * n);
        std::vector<double> c(m * n), want(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t l = 0; l < k; ++l) want[i * n + j] += a[i * k + l] * b[l * n + j];
        ref.gemm_nn(a.data(), b.data(), c.data(), m, n, k, false);
        CHECK(max_rel_err(c, want) < 1e-14);
    }
}

TEST_CASE("gemm variants agree across backends including edge shapes") {
    Rng rng(99);
    const KernelTable& ref = kernels::table_for(Backend::Scalar);
    const std::size_t shapes[][3] = {
        {1, 1, 1}, {2, 3, 4}, {4, 8, 16}, {5, 9, 7}, {12, 17, 33}, {64, 40, 25}, {3, 128, 31},
    };
    for (const Backend backend : kernels::available_backends()) {
        if (backend == Backend::Scalar) continue;
        const KernelTable& simd = kernels::table_for(backend);
        CAPTURE(simd.name);
        for (const auto& s : shapes) {
            const std::size_t m = s[0], n = s[1], k = s[2];
            const auto a = random_vec(rng, m * k);
            const auto b_nn = random_vec(rng, k * n);
            const auto b_nt = random_vec(rng, n * k);
            const auto a_tn = random_vec(rng, k * m);
            const auto c0 = random_vec(rng, m * n);
            std::vector<double> c_ref, c_simd;

            for (const bool acc : {false, true}) {
                c_ref = c0;
                c_simd = c0;
                ref.gemm_nn(a.data(), b_nn.data(), c_ref.data(), m, n, k, acc);
                simd.gemm_nn(a.data(), b_nn.data(), c_simd.data(), m, n, k, acc);
                CHECK(max_rel_err(c_ref, c_simd) < 1e-12);

                c_ref = c0;
                c_simd = c0;
                ref.gemm_nt(a.data(), b_nt.data(), c_ref.data(), m, n, k, acc);
                simd.gemm_nt(a.data(), b_nt.data(), c_simd.data(), m, n, k, acc);
                CHECK(max_rel_err(c_ref, c_simd) < 1e-12);

                c_ref = c0;
                c_simd = c0;
                ref.gemm_tn(a_tn.data(), b_nn.data(), c_ref.data(), m, n, k, acc);
                simd.gemm_tn(a_tn.data(), b_nn.data(), c_simd.data(), m, n, k, acc);
                CHECK(max_rel_err(c_ref, c_simd) < 1e-12);
            }
        }
    }
}

TEST_CASE("gemm_nt and gemm_tn are consistent with gemm_nn") {
    Rng rng(123);
    const KernelTable& t = kernels::active();
    const std::size_t m = 6, n = 10, k = 9;
    const auto a = random_vec(rng, m * k);
    const auto b = random_vec(rng, k * n);

    // Explicit transposes fed to the variant entry points.
    std::vector<double> bt(n * k), at(k * m);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];

    std::vector<double> c_nn(m * n), c_nt(m * n), c_tn(m * n);
    t.gemm_nn(a.data(), b.data(), c_nn.data(), m, n, k, false);
    t.gemm_nt(a.data(), bt.data(), c_nt.data(), m, n, k, false);
    t.gemm_tn(at.data(), b.data(), c_tn.data(), m, n, k, false);
    CHECK(max_rel_err(c_nn, c_nt) < 1e-12);
    CHECK(max_rel_err(c_nn, c_tn) < 1e-12);
}

TEST_CASE("active backend dispatch is deterministic") {
    const Backend b1 = kernels::active_backend();
    const Backend b2 = kernels::active_backend();
    CHECK(b1 == b2);
    CHECK(kernels::active().name == kernels::table_for(b1).name);
}
