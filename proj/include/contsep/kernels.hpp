#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace contsep::kernels {

// Dense double-precision inner loops behind the tensor engine, the DSP front
// end and the BSS projections. A scalar reference table always exists; SIMD
// tables (AVX2/AVX-512 on x86-64, NEON on aarch64) are selected at runtime
// from CPU capabilities and must agree with the scalar table (bitwise for
// elementwise maps, to tight tolerance for reductions and GEMM, which
// re-associate sums).
//
// GEMM operands are dense row-major with no padding:
//   gemm_nn: C(m x n) = A(m x k) * B(k x n)
//   gemm_nt: C(m x n) = A(m x k) * B(n x k)^T
//   gemm_tn: C(m x n) = A(k x m)^T * B(k x n)
// `accumulate` adds into C instead of overwriting it.

struct KernelTable {
    const char* name;

    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*div)(const double* a, const double* b, double* out, std::size_t n);

    // vector (+|-|*|/) scalar variants, used by broadcasting.
    void (*add_vs)(const double* a, double s, double* out, std::size_t n);
    void (*sub_vs)(const double* a, double s, double* out, std::size_t n);
    void (*sub_sv)(double s, const double* a, double* out, std::size_t n);
    void (*mul_vs)(const double* a, double s, double* out, std::size_t n);
    void (*div_sv)(double s, const double* a, double* out, std::size_t n);

    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);        // y += alpha*x
    void (*fmadd)(const double* a, const double* b, double* acc, std::size_t n);  // acc += a*b

    void (*vabs)(const double* x, double* out, std::size_t n);
    void (*vrelu)(const double* x, double* out, std::size_t n);
    void (*vclamp)(const double* x, double lo, double hi, double* out, std::size_t n);

    void (*relu_bwd)(const double* x, const double* g, double* acc, std::size_t n);  // acc += g*(x>0)
    void (*abs_bwd)(const double* x, const double* g, double* acc, std::size_t n);   // acc += g*sign(x)

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*sum_abs)(const double* x, std::size_t n);
    double (*vmax)(const double* x, std::size_t n);  // n > 0

    void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                    std::size_t k, bool accumulate);
    void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                    std::size_t k, bool accumulate);
    void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                    std::size_t k, bool accumulate);
};

enum class Backend { Scalar, Avx2, Avx512, Neon };

std::string backend_name(Backend b);

// Table lookup for one backend; throws ConfigError if it is not compiled in
// or not supported by this CPU.
const KernelTable& table_for(Backend b);

// Backends usable on this machine (always contains Scalar).
std::vector<Backend> available_backends();

// The table in use. Picked once: the best available backend, unless the
// CONTSEP_KERNELS env var ("scalar", "avx2", "avx512", "neon", "auto")
// overrides the choice.
const KernelTable& active();
Backend active_backend();

}  // namespace contsep::kernels
