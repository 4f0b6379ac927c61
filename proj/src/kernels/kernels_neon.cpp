// NEON kernel table for aarch64. Mirrors the scalar contracts with
// float64x2_t lanes.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "contsep/kernels.hpp"

namespace contsep::kernels {
namespace {

constexpr std::size_t kVec = 2;

void n_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void n_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void n_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void n_div(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vdivq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void n_add_vs(const double* a, double s, double* out, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] + s;
}
void n_sub_vs(const double* a, double s, double* out, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] - s;
}
void n_sub_sv(double s, const double* a, double* out, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vsubq_f64(vs, vld1q_f64(a + i)));
    for (; i < n; ++i) out[i] = s - a[i];
}
void n_mul_vs(const double* a, double s, double* out, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}
void n_div_sv(double s, const double* a, double* out, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vdivq_f64(vs, vld1q_f64(a + i)));
    for (; i < n; ++i) out[i] = s / a[i];
}

void n_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}
void n_fmadd(const double* a, const double* b, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        vst1q_f64(acc + i, vfmaq_f64(vld1q_f64(acc + i), vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}

void n_vabs(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vabsq_f64(vld1q_f64(x + i)));
    for (; i < n; ++i) out[i] = std::fabs(x[i]);
}
void n_vrelu(const double* x, double* out, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) vst1q_f64(out + i, vmaxq_f64(vld1q_f64(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void n_vclamp(const double* x, double lo, double hi, double* out, std::size_t n) {
    const float64x2_t vlo = vdupq_n_f64(lo);
    const float64x2_t vhi = vdupq_n_f64(hi);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec)
        vst1q_f64(out + i, vminq_f64(vmaxq_f64(vld1q_f64(x + i), vlo), vhi));
    for (; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

void n_relu_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
        const float64x2_t gated = vreinterpretq_f64_u64(
            vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i)), mask));
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), gated));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0) acc[i] += g[i];
    }
}
void n_abs_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        acc[i] = std::fma(sign, g[i], acc[i]);
    }
}

double n_dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 * kVec <= n; i += 2 * kVec) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    for (; i + kVec <= n; i += kVec) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
    return acc;
}
double n_sum(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}
double n_sum_abs(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + kVec <= n; i += kVec) acc0 = vaddq_f64(acc0, vabsq_f64(vld1q_f64(x + i)));
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}
double n_vmax(const double* x, std::size_t n) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= kVec) {
        float64x2_t vm = vld1q_f64(x);
        for (i = kVec; i + kVec <= n; i += kVec) vm = vmaxq_f64(vm, vld1q_f64(x + i));
        m = vmaxvq_f64(vm);
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

// 4x4 register block (8 accumulators of 2 lanes).
void n_gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    const std::size_t mb = m - m % 4;
    const std::size_t nb = n - n % 4;
    for (std::size_t i = 0; i < mb; i += 4) {
        for (std::size_t j = 0; j < nb; j += 4) {
            float64x2_t c00, c01, c10, c11, c20, c21, c30, c31;
            if (accumulate) {
                c00 = vld1q_f64(c + (i + 0) * n + j);
                c01 = vld1q_f64(c + (i + 0) * n + j + 2);
                c10 = vld1q_f64(c + (i + 1) * n + j);
                c11 = vld1q_f64(c + (i + 1) * n + j + 2);
                c20 = vld1q_f64(c + (i + 2) * n + j);
                c21 = vld1q_f64(c + (i + 2) * n + j + 2);
                c30 = vld1q_f64(c + (i + 3) * n + j);
                c31 = vld1q_f64(c + (i + 3) * n + j + 2);
            } else {
                c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = vdupq_n_f64(0.0);
            }
            for (std::size_t l = 0; l < k; ++l) {
                const float64x2_t b0 = vld1q_f64(b + l * n + j);
                const float64x2_t b1 = vld1q_f64(b + l * n + j + 2);
                float64x2_t av = vdupq_n_f64(a[(i + 0) * k + l]);
                c00 = vfmaq_f64(c00, av, b0);
                c01 = vfmaq_f64(c01, av, b1);
                av = vdupq_n_f64(a[(i + 1) * k + l]);
                c10 = vfmaq_f64(c10, av, b0);
                c11 = vfmaq_f64(c11, av, b1);
                av = vdupq_n_f64(a[(i + 2) * k + l]);
                c20 = vfmaq_f64(c20, av, b0);
                c21 = vfmaq_f64(c21, av, b1);
                av = vdupq_n_f64(a[(i + 3) * k + l]);
                c30 = vfmaq_f64(c30, av, b0);
                c31 = vfmaq_f64(c31, av, b1);
            }
            vst1q_f64(c + (i + 0) * n + j, c00);
            vst1q_f64(c + (i + 0) * n + j + 2, c01);
            vst1q_f64(c + (i + 1) * n + j, c10);
            vst1q_f64(c + (i + 1) * n + j + 2, c11);
            vst1q_f64(c + (i + 2) * n + j, c20);
            vst1q_f64(c + (i + 2) * n + j + 2, c21);
            vst1q_f64(c + (i + 3) * n + j, c30);
            vst1q_f64(c + (i + 3) * n + j + 2, c31);
        }
        patch_nn(a, b, c, i, i + 4, nb, n, n, k, accumulate);
    }
    patch_nn(a, b, c, mb, m, 0, n, n, k, accumulate);
}

void n_gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            float64x2_t acc0 = vdupq_n_f64(0.0);
            std::size_t l = 0;
            for (; l + kVec <= k; l += kVec)
                acc0 = vfmaq_f64(acc0, vld1q_f64(arow + l), vld1q_f64(brow + l));
            double acc = vaddvq_f64(acc0);
            for (; l < k; ++l) acc = std::fma(arow[l], brow[l], acc);
            c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
        }
    }
}

void n_gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    const std::size_t nb = n - n % kVec;
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            const float64x2_t vav = vdupq_n_f64(av);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j < nb; j += kVec)
                vst1q_f64(crow + j, vfmaq_f64(vld1q_f64(crow + j), vav, vld1q_f64(brow + j)));
            for (; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
        }
    }
}

}  // namespace

const KernelTable& neon_table() {
    static const KernelTable table = {
        "neon",   n_add,    n_sub,      n_mul,     n_div,      n_add_vs,   n_sub_vs,
        n_sub_sv, n_mul_vs, n_div_sv,   n_axpy,    n_fmadd,    n_vabs,     n_vrelu,
        n_vclamp, n_relu_bwd, n_abs_bwd, n_dot,    n_sum,      n_sum_abs,  n_vmax,
        n_gemm_nn, n_gemm_nt, n_gemm_tn,
    };
    return table;
}

}  // namespace contsep::kernels

#endif  // aarch64
