// Scalar reference kernels. This file is built with -ffp-contract=off so the
// reference semantics stay plain mul-then-add; where fused behaviour is part
// of the contract (axpy/fmadd/abs_bwd) std::fma is spelled out explicitly to
// match the SIMD tables bitwise.

#include <algorithm>
#include <cmath>

#include "contsep/kernels.hpp"

namespace contsep::kernels {
namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void s_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void s_div(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

void s_add_vs(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}
void s_sub_vs(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - s;
}
void s_sub_sv(double s, const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = s - a[i];
}
void s_mul_vs(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
void s_div_sv(double s, const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = s / a[i];
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}
void s_fmadd(const double* a, const double* b, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}

void s_vabs(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(x[i]);
}
void s_vrelu(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void s_vclamp(const double* x, double lo, double hi, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

void s_relu_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0) acc[i] += g[i];
    }
}
void s_abs_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        acc[i] = std::fma(sign, g[i], acc[i]);
    }
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}
double s_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}
double s_sum_abs(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}
double s_vmax(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

// ikj ordering: the inner loop streams one row of B and one row of C.
void s_gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        const double* arow = a + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void s_gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

void s_gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
               std::size_t k, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar", s_add,    s_sub,      s_mul,     s_div,      s_add_vs,   s_sub_vs,
        s_sub_sv, s_mul_vs, s_div_sv,   s_axpy,    s_fmadd,    s_vabs,     s_vrelu,
        s_vclamp, s_relu_bwd, s_abs_bwd, s_dot,    s_sum,      s_sum_abs,  s_vmax,
        s_gemm_nn, s_gemm_nt, s_gemm_tn,
    };
    return table;
}

}  // namespace contsep::kernels
