// AVX2+FMA kernel table. Compiled with -mavx2 -mfma; only dispatched to when
// the CPU reports both features.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "contsep/kernels.hpp"

namespace contsep::kernels {
namespace {

constexpr std::size_t kVec = 4;

inline __m256d abs_mask() { return _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffll)); }

void a_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void a_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void a_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void a_div(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void a_add_vs(const double* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] + s;
}
void a_sub_vs(const double* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] - s;
}
void a_sub_sv(double s, const double* a, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(vs, _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = s - a[i];
}
void a_mul_vs(const double* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}
void a_div_sv(double s, const double* a, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_div_pd(vs, _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = s / a[i];
}

void a_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}
void a_fmadd(const double* a, const double* b, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                                  _mm256_loadu_pd(acc + i)));
    for (; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}

void a_vabs(const double* x, double* out, std::size_t n) {
    const __m256d mask = abs_mask();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_and_pd(_mm256_loadu_pd(x + i), mask));
    for (; i < n; ++i) out[i] = std::fabs(x[i]);
}
void a_vrelu(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void a_vclamp(const double* x, double lo, double hi, double* out, std::size_t n) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        _mm256_storeu_pd(out + i,
                         _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), vlo), vhi));
    for (; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

void a_relu_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gated = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), gated));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0) acc[i] += g[i];
    }
}
void a_abs_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d neg_one = _mm256_set1_pd(-1.0);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d sg = _mm256_or_pd(_mm256_and_pd(_mm256_cmp_pd(xv, zero, _CMP_GT_OQ), one),
                                        _mm256_and_pd(_mm256_cmp_pd(xv, zero, _CMP_LT_OQ), neg_one));
        _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(sg, _mm256_loadu_pd(g + i),
                                                  _mm256_loadu_pd(acc + i)));
    }
    for (; i < n; ++i) {
        const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        acc[i] = std::fma(sign, g[i], acc[i]);
    }
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double a_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kVec <= n; i += 2 * kVec) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + kVec <= n; i += kVec)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}
double a_sum(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kVec <= n; i += 2 * kVec) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + kVec <= n; i += kVec) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}
double a_sum_abs(const double* x, std::size_t n) {
    const __m256d mask = abs_mask();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kVec <= n; i += 2 * kVec) {
        acc0 = _mm256_add_pd(acc0, _mm256_and_pd(_mm256_loadu_pd(x + i), mask));
        acc1 = _mm256_add_pd(acc1, _mm256_and_pd(_mm256_loadu_pd(x + i + 4), mask));
    }
    for (; i + kVec <= n; i += kVec)
        acc0 = _mm256_add_pd(acc0, _mm256_and_pd(_mm256_loadu_pd(x + i), mask));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}
double a_vmax(const double* x, std::size_t n) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= kVec) {
        __m256d vm = _mm256_loadu_pd(x);
        for (i = kVec; i + kVec <= n; i += kVec)
            vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
        const __m128d lo = _mm256_castpd256_pd128(vm);
        const __m128d hi = _mm256_extractf128_pd(vm, 1);
        const __m128d mx = _mm_max_pd(lo, hi);
        m = _mm_cvtsd_f64(_mm_max_sd(mx, _mm_unpackhi_pd(mx, mx)));
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

// Plain fallback for block edges.
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

// 4x8 register block over k.
void a_gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    const std::size_t mb = m - m % 4;
    const std::size_t nb = n - n % 8;
    for (std::size_t i = 0; i < mb; i += 4) {
        for (std::size_t j = 0; j < nb; j += 8) {
            __m256d c00, c01, c10, c11, c20, c21, c30, c31;
            if (accumulate) {
                c00 = _mm256_loadu_pd(c + (i + 0) * n + j);
                c01 = _mm256_loadu_pd(c + (i + 0) * n + j + 4);
                c10 = _mm256_loadu_pd(c + (i + 1) * n + j);
                c11 = _mm256_loadu_pd(c + (i + 1) * n + j + 4);
                c20 = _mm256_loadu_pd(c + (i + 2) * n + j);
                c21 = _mm256_loadu_pd(c + (i + 2) * n + j + 4);
                c30 = _mm256_loadu_pd(c + (i + 3) * n + j);
                c31 = _mm256_loadu_pd(c + (i + 3) * n + j + 4);
            } else {
                c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
            }
            for (std::size_t l = 0; l < k; ++l) {
                const __m256d b0 = _mm256_loadu_pd(b + l * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + l * n + j + 4);
                __m256d av = _mm256_set1_pd(a[(i + 0) * k + l]);
                c00 = _mm256_fmadd_pd(av, b0, c00);
                c01 = _mm256_fmadd_pd(av, b1, c01);
                av = _mm256_set1_pd(a[(i + 1) * k + l]);
                c10 = _mm256_fmadd_pd(av, b0, c10);
                c11 = _mm256_fmadd_pd(av, b1, c11);
                av = _mm256_set1_pd(a[(i + 2) * k + l]);
                c20 = _mm256_fmadd_pd(av, b0, c20);
                c21 = _mm256_fmadd_pd(av, b1, c21);
                av = _mm256_set1_pd(a[(i + 3) * k + l]);
                c30 = _mm256_fmadd_pd(av, b0, c30);
                c31 = _mm256_fmadd_pd(av, b1, c31);
            }
            _mm256_storeu_pd(c + (i + 0) * n + j, c00);
            _mm256_storeu_pd(c + (i + 0) * n + j + 4, c01);
            _mm256_storeu_pd(c + (i + 1) * n + j, c10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, c11);
            _mm256_storeu_pd(c + (i + 2) * n + j, c20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, c21);
            _mm256_storeu_pd(c + (i + 3) * n + j, c30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, c31);
        }
        patch_nn(a, b, c, i, i + 4, nb, n, n, k, accumulate);
    }
    patch_nn(a, b, c, mb, m, 0, n, n, k, accumulate);
}

// Rows of A dotted with rows of B; 1x4 block of dot products.
void a_gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    const std::size_t nb = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < nb; j += 4) {
            __m256d acc0 = _mm256_setzero_pd();
            __m256d acc1 = _mm256_setzero_pd();
            __m256d acc2 = _mm256_setzero_pd();
            __m256d acc3 = _mm256_setzero_pd();
            std::size_t l = 0;
            for (; l + kVec <= k; l += kVec) {
                const __m256d av = _mm256_loadu_pd(arow + l);
                acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + (j + 0) * k + l), acc0);
                acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + (j + 1) * k + l), acc1);
                acc2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + (j + 2) * k + l), acc2);
                acc3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + (j + 3) * k + l), acc3);
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

// A is (k x m); stream rows of B with column broadcasts from A.
void a_gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    const std::size_t nb = n - n % 8;
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            const __m256d vav = _mm256_set1_pd(av);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j < nb; j += 8) {
                _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(vav, _mm256_loadu_pd(brow + j),
                                                           _mm256_loadu_pd(crow + j)));
                _mm256_storeu_pd(crow + j + 4,
                                 _mm256_fmadd_pd(vav, _mm256_loadu_pd(brow + j + 4),
                                                 _mm256_loadu_pd(crow + j + 4)));
            }
            for (; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
        }
    }
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table = {
        "avx2",   a_add,    a_sub,      a_mul,     a_div,      a_add_vs,   a_sub_vs,
        a_sub_sv, a_mul_vs, a_div_sv,   a_axpy,    a_fmadd,    a_vabs,     a_vrelu,
        a_vclamp, a_relu_bwd, a_abs_bwd, a_dot,    a_sum,      a_sum_abs,  a_vmax,
        a_gemm_nn, a_gemm_nt, a_gemm_tn,
    };
    return table;
}

}  // namespace contsep::kernels

#endif  // x86-64
