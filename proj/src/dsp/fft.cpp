#include "contsep/fft.hpp"

#include <cmath>

#include "contsep/error.hpp"

namespace contsep::dsp {

namespace {

constexpr double kTau = 6.28318530717958647692;

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::int64_t next_pow2(std::int64_t n) {
    std::int64_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

Fft::Fft(std::int64_t n) : n_(n) {
    if (n <= 0) throw ConfigError("fft size must be positive");
    is_pow2_ = is_power_of_two(n);
    work_ = is_pow2_ ? n : next_pow2(2 * n - 1);

    // bit-reversal permutation for the work size
    bitrev_.assign(static_cast<std::size_t>(work_), 0);
    for (std::int64_t i = 1, j = 0; i < work_; ++i) {
        std::int64_t bit = work_ >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        bitrev_[static_cast<std::size_t>(i)] = j;
    }
    // stage twiddles: for len = 2,4,...,work: work/len entries each would be
    // redundant; store half-len roots per stage packed sequentially.
    for (std::int64_t len = 2; len <= work_; len <<= 1) {
        const double ang = -kTau / static_cast<double>(len);
        for (std::int64_t k = 0; k < len / 2; ++k) {
            tw_re_.push_back(std::cos(ang * static_cast<double>(k)));
            tw_im_.push_back(std::sin(ang * static_cast<double>(k)));
        }
    }

    if (!is_pow2_) {
        chirp_re_.resize(static_cast<std::size_t>(n));
        chirp_im_.resize(static_cast<std::size_t>(n));
        std::vector<double> hre(static_cast<std::size_t>(work_), 0.0);
        std::vector<double> him(static_cast<std::size_t>(work_), 0.0);
        for (std::int64_t k = 0; k < n; ++k) {
            const std::int64_t k2 = (k * k) % (2 * n);
            const double ang = -3.14159265358979323846 * static_cast<double>(k2) /
                               static_cast<double>(n);
            chirp_re_[static_cast<std::size_t>(k)] = std::cos(ang);
            chirp_im_[static_cast<std::size_t>(k)] = std::sin(ang);
            hre[static_cast<std::size_t>(k)] = std::cos(ang);
            him[static_cast<std::size_t>(k)] = -std::sin(ang);
            if (k > 0) {
                hre[static_cast<std::size_t>(work_ - k)] = hre[static_cast<std::size_t>(k)];
                him[static_cast<std::size_t>(work_ - k)] = him[static_cast<std::size_t>(k)];
            }
        }
        pow2_forward(hre.data(), him.data(), false);
        kernel_re_ = std::move(hre);
        kernel_im_ = std::move(him);
    }
}

void Fft::pow2_forward(double* re, double* im, bool invert) const {
    const std::int64_t n = work_;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t j = bitrev_[static_cast<std::size_t>(i)];
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    std::size_t tw_off = 0;
    for (std::int64_t len = 2; len <= n; len <<= 1) {
        const std::int64_t half = len / 2;
        for (std::int64_t start = 0; start < n; start += len) {
            for (std::int64_t k = 0; k < half; ++k) {
                const double wr = tw_re_[tw_off + static_cast<std::size_t>(k)];
                const double wi = invert ? -tw_im_[tw_off + static_cast<std::size_t>(k)]
                                         : tw_im_[tw_off + static_cast<std::size_t>(k)];
                const std::int64_t a = start + k;
                const std::int64_t b = a + half;
                const double xr = re[b] * wr - im[b] * wi;
                const double xi = re[b] * wi + im[b] * wr;
                re[b] = re[a] - xr;
                im[b] = im[a] - xi;
                re[a] += xr;
                im[a] += xi;
            }
        }
        tw_off += static_cast<std::size_t>(half);
    }
}

void Fft::forward(const double* re_in, const double* im_in, double* re_out,
                  double* im_out) const {
    if (n_ == 1) {
        re_out[0] = re_in[0];
        im_out[0] = im_in ? im_in[0] : 0.0;
        return;
    }
    if (is_pow2_) {
        for (std::int64_t i = 0; i < n_; ++i) {
            re_out[i] = re_in[i];
            im_out[i] = im_in ? im_in[i] : 0.0;
        }
        pow2_forward(re_out, im_out, false);
        return;
    }
    // Bluestein: x' = x .* chirp, conv with conj-chirp kernel, .* chirp.
    std::vector<double> are(static_cast<std::size_t>(work_), 0.0);
    std::vector<double> aim(static_cast<std::size_t>(work_), 0.0);
    for (std::int64_t k = 0; k < n_; ++k) {
        const double xr = re_in[k];
        const double xi = im_in ? im_in[k] : 0.0;
        const double cr = chirp_re_[static_cast<std::size_t>(k)];
        const double ci = chirp_im_[static_cast<std::size_t>(k)];
        are[static_cast<std::size_t>(k)] = xr * cr - xi * ci;
        aim[static_cast<std::size_t>(k)] = xr * ci + xi * cr;
    }
    pow2_forward(are.data(), aim.data(), false);
    for (std::int64_t k = 0; k < work_; ++k) {
        const double xr = are[static_cast<std::size_t>(k)];
        const double xi = aim[static_cast<std::size_t>(k)];
        const double hr = kernel_re_[static_cast<std::size_t>(k)];
        const double hi = kernel_im_[static_cast<std::size_t>(k)];
        are[static_cast<std::size_t>(k)] = xr * hr - xi * hi;
        aim[static_cast<std::size_t>(k)] = xr * hi + xi * hr;
    }
    pow2_forward(are.data(), aim.data(), true);
    const double inv = 1.0 / static_cast<double>(work_);
    for (std::int64_t k = 0; k < n_; ++k) {
        const double xr = are[static_cast<std::size_t>(k)] * inv;
        const double xi = aim[static_cast<std::size_t>(k)] * inv;
        const double cr = chirp_re_[static_cast<std::size_t>(k)];
        const double ci = chirp_im_[static_cast<std::size_t>(k)];
        re_out[k] = xr * cr - xi * ci;
        im_out[k] = xr * ci + xi * cr;
    }
}

void Fft::inverse(const double* re_in, const double* im_in, double* re_out,
                  double* im_out) const {
    // ifft(x) = conj(fft(conj(x))) / n
    std::vector<double> nim(static_cast<std::size_t>(n_));
    for (std::int64_t i = 0; i < n_; ++i) nim[static_cast<std::size_t>(i)] = -(im_in ? im_in[i] : 0.0);
    forward(re_in, nim.data(), re_out, im_out);
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::int64_t i = 0; i < n_; ++i) {
        re_out[i] *= inv;
        im_out[i] *= -inv;
    }
}

}  // namespace contsep::dsp
