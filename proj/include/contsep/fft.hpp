#pragma once

#include <cstdint>
#include <vector>

namespace contsep::dsp {

// Complex FFT of arbitrary length: iterative radix-2 for powers of two,
// Bluestein's chirp-z otherwise (the profiles use window lengths 1022 and
// 254, neither a power of two). Plans precompute twiddles; reuse one Fft per
// size.
class Fft {
  public:
    explicit Fft(std::int64_t n);

    std::int64_t size() const { return n_; }

    void forward(const double* re_in, const double* im_in, double* re_out, double* im_out) const;
    // Unitary pair: inverse(forward(x)) == x (up to rounding); includes 1/n.
    void inverse(const double* re_in, const double* im_in, double* re_out, double* im_out) const;

  private:
    void pow2_forward(double* re, double* im, bool invert) const;

    std::int64_t n_ = 0;
    bool is_pow2_ = false;

    // radix-2 tables (for n_ or the Bluestein work size)
    std::int64_t work_ = 0;
    std::vector<std::int64_t> bitrev_;
    std::vector<double> tw_re_, tw_im_;  // per-stage twiddles, packed

    // Bluestein tables
    std::vector<double> chirp_re_, chirp_im_;    // exp(-i pi k^2 / n)
    std::vector<double> kernel_re_, kernel_im_;  // FFT of the conjugate chirp
};

}  // namespace contsep::dsp
