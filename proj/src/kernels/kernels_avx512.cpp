// AVX-512F kernel table. Same contracts as the scalar table; see
// kernels_scalar.cpp for the reference semantics.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "contsep/kernels.hpp"

namespace contsep::kernels {
namespace {

constexpr std::size_t kVec = 8;

void z_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_add_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void z_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_sub_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void z_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_mul_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void z_div(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_div_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void z_add_vs(const double* a, double s, double* out, std::size_t n) {
    const __m512d vs = _mm512_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_add_pd(_mm512_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] + s;
}
void z_sub_vs(const double* a, double s, double* out, std::size_t n) {
    const __m512d vs = _mm512_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_sub_pd(_mm512_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] - s;
}
void z_sub_sv(double s, const double* a, double* out, std::size_t n) {
    const __m512d vs = _mm512_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_sub_pd(vs, _mm512_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = s - a[i];
}
void z_mul_vs(const double* a, double s, double* out, std::size_t n) {
    const __m512d vs = _mm512_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_mul_pd(_mm512_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}
void z_div_sv(double s, const double* a, double* out, std::size_t n) {
    const __m512d vs = _mm512_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_div_pd(vs, _mm512_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = s / a[i];
}

void z_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m512d va = _mm512_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}
void z_fmadd(const double* a, const double* b, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(acc + i, _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i),
                                                  _mm512_loadu_pd(acc + i)));
    for (; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}

void z_vabs(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_abs_pd(_mm512_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = std::fabs(x[i]);
}
void z_vrelu(const double* x, double* out, std::size_t n) {
    const __m512d zero = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_max_pd(_mm512_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void z_vclamp(const double* x, double lo, double hi, double* out, std::size_t n) {
    const __m512d vlo = _mm512_set1_pd(lo);
    const __m512d vhi = _mm512_set1_pd(hi);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm512_storeu_pd(out + i, _mm512_min_pd(_mm512_max_pd(_mm512_loadu_pd(x + i), vlo), vhi));
    for (; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

void z_relu_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    const __m512d zero = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) {
        const __mmask8 mask = _mm512_cmp_pd_mask(_mm512_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m512d av = _mm512_loadu_pd(acc + i);
        _mm512_storeu_pd(acc + i, _mm512_mask_add_pd(av, mask, av, _mm512_loadu_pd(g + i)));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0) acc[i] += g[i];
    }
}
void z_abs_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    const __m512d zero = _mm512_setzero_pd();
    const __m512d one = _mm512_set1_pd(1.0);
    const __m512d neg_one = _mm512_set1_pd(-1.0);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) {
        const __m512d xv = _mm512_loadu_pd(x + i);
        __m512d sg = _mm512_setzero_pd();
        sg = _mm512_mask_mov_pd(sg, _mm512_cmp_pd_mask(xv, zero, _CMP_GT_OQ), one);
        sg = _mm512_mask_mov_pd(sg, _mm512_cmp_pd_mask(xv, zero, _CMP_LT_OQ), neg_one);
        _mm512_storeu_pd(acc + i,
                         _mm512_fmadd_pd(sg, _mm512_loadu_pd(g + i), _mm512_loadu_pd(acc + i)));
    }
    for (; i < n; ++i) {
        const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        acc[i] = std::fma(sign, g[i], acc[i]);
    }
}

inline double hsum(__m512d v) {
    const __m256d lo = _mm512_castpd512_pd256(v);
    const __m256d hi = _mm512_extractf64x4_pd(v, 1);
    const __m256d s4 = _mm256_add_pd(lo, hi);
    const __m128d s2 = _mm_add_pd(_mm256_castpd256_pd128(s4), _mm256_extractf128_pd(s4, 1));
    return _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
}

double z_dot(const double* a, const double* b, std::size_t n) {
    __m512d acc0 = _mm512_setzero_pd();
    __m512d acc1 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kVec <= n; i += 2 * kVec) {
        acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), acc0);
        acc1 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 8), _mm512_loadu_pd(b + i + 8), acc1);
    }
    for (; i + kVec <= n; i += kVec)
        acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), acc0);
    double acc = hsum(_mm512_add_pd(acc0, acc1));
    for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}
double z_sum(const double* x, std::size_t n) {
    __m512d acc0 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) acc0 = _mm512_add_pd(acc0, _mm512_loadu_pd(x + i));
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}
double z_sum_abs(const double* x, std::size_t n) {
    __m512d acc0 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        acc0 = _mm512_add_pd(acc0, _mm512_abs_pd(_mm512_loadu_pd(x + i)));
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}
double z_vmax(const double* x, std::size_t n) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= kVec) {
        __m512d vm = _mm512_loadu_pd(x);
        for (i = kVec; i + kVec <= n; i += kVec) vm = _mm512_max_pd(vm, _mm512_loadu_pd(x + i));
        m = _mm512_reduce_max_pd(vm);
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void patch_nn(const double* a, const double* b, double* c, std::size_t i0, std::size_t i1,
              std::size_t j0, std::size_t j1, std::size_t n, std::size_t k, bool accumulate) {
    for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) {
            double acc = accumulate ? c[i * n + j] : 0.0;
            for (std::size_t l = 0; l < k; ++l) acc = std::fma(a[i * k + l], b[l * n + j], acc);
            c[i * n + j] = acc;
        }
    }
}

// 4x16 register block.
void z_gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    const std::size_t mb = m - m % 4;
    const std::size_t nb = n - n % 16;
    for (std::size_t i = 0; i < mb; i += 4) {
        for (std::size_t j = 0; j < nb; j += 16) {
            __m512d c00, c01, c10, c11, c20, c21, c30, c31;
            if (accumulate) {
                c00 = _mm512_loadu_pd(c + (i + 0) * n + j);
                c01 = _mm512_loadu_pd(c + (i + 0) * n + j + 8);
                c10 = _mm512_loadu_pd(c + (i + 1) * n + j);
                c11 = _mm512_loadu_pd(c + (i + 1) * n + j + 8);
                c20 = _mm512_loadu_pd(c + (i + 2) * n + j);
                c21 = _mm512_loadu_pd(c + (i + 2) * n + j + 8);
                c30 = _mm512_loadu_pd(c + (i + 3) * n + j);
                c31 = _mm512_loadu_pd(c + (i + 3) * n + j + 8);
            } else {
                c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm512_setzero_pd();
            }
            for (std::size_t l = 0; l < k; ++l) {
                const __m512d b0 = _mm512_loadu_pd(b + l * n + j);
                const __m512d b1 = _mm512_loadu_pd(b + l * n + j + 8);
                __m512d av = _mm512_set1_pd(a[(i + 0) * k + l]);
                c00 = _mm512_fmadd_pd(av, b0, c00);
                c01 = _mm512_fmadd_pd(av, b1, c01);
                av = _mm512_set1_pd(a[(i + 1) * k + l]);
                c10 = _mm512_fmadd_pd(av, b0, c10);
                c11 = _mm512_fmadd_pd(av, b1, c11);
                av = _mm512_set1_pd(a[(i + 2) * k + l]);
                c20 = _mm512_fmadd_pd(av, b0, c20);
                c21 = _mm512_fmadd_pd(av, b1, c21);
                av = _mm512_set1_pd(a[(i + 3) * k + l]);
                c30 = _mm512_fmadd_pd(av, b0, c30);
                c31 = _mm512_fmadd_pd(av, b1, c31);
            }
            _mm512_storeu_pd(c + (i + 0) * n + j, c00);
            _mm512_storeu_pd(c + (i + 0) * n + j + 8, c01);
            _mm512_storeu_pd(c + (i + 1) * n + j, c10);
            _mm512_storeu_pd(c + (i + 1) * n + j + 8, c11);
            _mm512_storeu_pd(c + (i + 2) * n + j, c20);
            _mm512_storeu_pd(c + (i + 2) * n + j + 8, c21);
            _mm512_storeu_pd(c + (i + 3) * n + j, c30);
            _mm512_storeu_pd(c + (i + 3) * n + j + 8, c31);
        }
        patch_nn(a, b, c, i, i + 4, nb, n, n, k, accumulate);
    }
    patch_nn(a, b, c, mb, m, 0, n, n, k, accumulate);
}

void z_gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    const std::size_t nb = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < nb; j += 4) {
            __m512d acc0 = _mm512_setzero_pd();
            __m512d acc1 = _mm512_setzero_pd();
            __m512d acc2 = _mm512_setzero_pd();
            __m512d acc3 = _mm512_setzero_pd();
            std::size_t l = 0;
            for (; l + kVec <= k; l += kVec) {
                const __m512d av = _mm512_loadu_pd(arow + l);
                acc0 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b + (j + 0) * k + l), acc0);
                acc1 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b + (j + 1) * k + l), acc1);
                acc2 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b + (j + 2) * k + l), acc2);
                acc3 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b + (j + 3) * k + l), acc3);
            }
            double d0 = hsum(acc0), d1 = hsum(acc1), d2 = hsum(acc2), d3 = hsum(acc3);
            for (; l < k; ++l) {
                const double av = arow[l];
                d0 = std::fma(av, b[(j + 0) * k + l], d0);
                d1 = std::fma(av, b[(j + 1) * k + l], d1);
                d2 = std::fma(av, b[(j + 2) * k + l], d2);
                d3 = std::fma(av, b[(j + 3) * k + l], d3);
            }
            double* crow = c + i * n + j;
            if (accumulate) {
                crow[0] += d0;
                crow[1] += d1;
                crow[2] += d2;
                crow[3] += d3;
            } else {
                crow[0] = d0;
                crow[1] = d1;
                crow[2] = d2;
                crow[3] = d3;
            }
        }
        for (std::size_t j = nb; j < n; ++j) {
            double acc = accumulate ? c[i * n + j] : 0.0;
            for (std::size_t l = 0; l < k; ++l) acc = std::fma(arow[l], b[j * k + l], acc);
            c[i * n + j] = acc;
        }
    }
}

void z_gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    const std::size_t nb = n - n % kVec;
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            const __m512d vav = _mm512_set1_pd(av);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j < nb; j += kVec) {
                _mm512_storeu_pd(crow + j, _mm512_fmadd_pd(vav, _mm512_loadu_pd(brow + j),
                                                           _mm512_loadu_pd(crow + j)));
            }
            for (; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
        }
    }
}

}  // namespace

const KernelTable& avx512_table() {
    static const KernelTable table = {
        "avx512", z_add,    z_sub,      z_mul,     z_div,      z_add_vs,   z_sub_vs,
        z_sub_sv, z_mul_vs, z_div_sv,   z_axpy,    z_fmadd,    z_vabs,     z_vrelu,
        z_vclamp, z_relu_bwd, z_abs_bwd, z_dot,    z_sum,      z_sum_abs,  z_vmax,
        z_gemm_nn, z_gemm_nt, z_gemm_tn,
    };
    return table;
}

}  // namespace contsep::kernels

#endif  // x86-64
