#include <algorithm>
#include <cmath>

#include "contsep/dsp.hpp"
#include "contsep/error.hpp"
#include "contsep/fft.hpp"

namespace contsep::dsp {

namespace {

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.5 - 0.5 * std::cos(6.28318530717958647692 * i / static_cast<double>(n));
    return w;
}

// Reflective pad by window_len/2 on both sides.
std::vector<double> reflect_pad(const std::vector<double>& x, std::int64_t pad) {
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    std::vector<double> out(static_cast<std::size_t>(n + 2 * pad));
    for (std::int64_t i = 0; i < n + 2 * pad; ++i) {
        std::int64_t j = i - pad;
        while (j < 0 || j >= n) {
            if (j < 0) j = -j;
            if (j >= n) j = 2 * n - 2 - j;
        }
        out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(j)];
    }
    return out;
}

void validate_stft_params(int window_len, int hop) {
    if (window_len <= 0 || hop <= 0) throw ConfigError("stft window and hop must be positive");
    if (window_len % 2 != 0) throw ConfigError("stft window length must be even");
    if (window_len < hop) throw ConfigError("stft window length smaller than hop");
}

}  // namespace

ComplexSpectrogram stft(const Waveform& w, int window_len, int hop) {
    validate_stft_params(window_len, hop);
    const std::int64_t len = static_cast<std::int64_t>(w.samples.size());
    if (len < window_len) {
        throw InputError("signal of " + std::to_string(len) + " samples is shorter than the " +
                         std::to_string(window_len) + "-sample window");
    }
    const std::int64_t pad = window_len / 2;
    const auto padded = reflect_pad(w.samples, pad);
    const auto window = hann_window(window_len);
    const std::int64_t frames = 1 + len / hop;
    const std::int64_t bins = window_len / 2 + 1;

    ComplexSpectrogram out;
    out.freq_bins = bins;
    out.frames = frames;
    out.window_len = window_len;
    out.hop = hop;
    out.re.assign(static_cast<std::size_t>(bins * frames), 0.0);
    out.im.assign(static_cast<std::size_t>(bins * frames), 0.0);

    const Fft fft(window_len);
    std::vector<double> frame(static_cast<std::size_t>(window_len));
    std::vector<double> fre(static_cast<std::size_t>(window_len));
    std::vector<double> fim(static_cast<std::size_t>(window_len));
    for (std::int64_t m = 0; m < frames; ++m) {
        const double* src = padded.data() + m * hop;
        for (int i = 0; i < window_len; ++i)
            frame[static_cast<std::size_t>(i)] = src[i] * window[static_cast<std::size_t>(i)];
        fft.forward(frame.data(), nullptr, fre.data(), fim.data());
        for (std::int64_t b = 0; b < bins; ++b) {
            out.re[out.idx(b, m)] = fre[static_cast<std::size_t>(b)];
            out.im[out.idx(b, m)] = fim[static_cast<std::size_t>(b)];
        }
    }
    return out;
}

ComplexSpectrogram stft_fixed(const Waveform& w, int window_len, int hop, std::int64_t frames) {
    ComplexSpectrogram full = stft(w, window_len, hop);
    if (full.frames == frames) return full;
    ComplexSpectrogram out;
    out.freq_bins = full.freq_bins;
    out.frames = frames;
    out.window_len = window_len;
    out.hop = hop;
    out.re.assign(static_cast<std::size_t>(out.freq_bins * frames), 0.0);
    out.im.assign(static_cast<std::size_t>(out.freq_bins * frames), 0.0);
    const std::int64_t copy = std::min(frames, full.frames);
    for (std::int64_t b = 0; b < out.freq_bins; ++b) {
        std::copy_n(full.re.begin() + static_cast<std::ptrdiff_t>(full.idx(b, 0)), copy,
                    out.re.begin() + static_cast<std::ptrdiff_t>(out.idx(b, 0)));
        std::copy_n(full.im.begin() + static_cast<std::ptrdiff_t>(full.idx(b, 0)), copy,
                    out.im.begin() + static_cast<std::ptrdiff_t>(out.idx(b, 0)));
    }
    return out;
}

Waveform istft(const ComplexSpectrogram& c, std::int64_t target_len, int sample_rate_hz) {
    validate_stft_params(c.window_len, c.hop);
    if (c.freq_bins != c.window_len / 2 + 1) {
        throw DimensionError("spectrogram bin count " + std::to_string(c.freq_bins) +
                             " inconsistent with window " + std::to_string(c.window_len));
    }
    const int n = c.window_len;
    const std::int64_t pad = n / 2;
    const std::int64_t ola_len = (c.frames - 1) * c.hop + n;
    if (target_len + pad > ola_len) {
        throw InputError("requested " + std::to_string(target_len) +
                         " samples but the spectrogram only covers " + std::to_string(ola_len - pad));
    }
    const auto window = hann_window(n);
    std::vector<double> acc(static_cast<std::size_t>(ola_len), 0.0);
    std::vector<double> den(static_cast<std::size_t>(ola_len), 0.0);

    const Fft fft(n);
    std::vector<double> sre(static_cast<std::size_t>(n)), sim(static_cast<std::size_t>(n));
    std::vector<double> tre(static_cast<std::size_t>(n)), tim(static_cast<std::size_t>(n));
    for (std::int64_t m = 0; m < c.frames; ++m) {
        // hermitian extension of the one-sided spectrum
        for (std::int64_t b = 0; b < c.freq_bins; ++b) {
            sre[static_cast<std::size_t>(b)] = c.re[c.idx(b, m)];
            sim[static_cast<std::size_t>(b)] = c.im[c.idx(b, m)];
        }
        for (std::int64_t b = c.freq_bins; b < n; ++b) {
            sre[static_cast<std::size_t>(b)] = c.re[c.idx(n - b, m)];
            sim[static_cast<std::size_t>(b)] = -c.im[c.idx(n - b, m)];
        }
        fft.inverse(sre.data(), sim.data(), tre.data(), tim.data());
        double* dst = acc.data() + m * c.hop;
        double* dd = den.data() + m * c.hop;
        for (int i = 0; i < n; ++i) {
            const double wv = window[static_cast<std::size_t>(i)];
            dst[i] += tre[static_cast<std::size_t>(i)] * wv;
            dd[i] += wv * wv;
        }
    }

    Waveform out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.resize(static_cast<std::size_t>(target_len));
    for (std::int64_t i = 0; i < target_len; ++i) {
        const std::int64_t j = i + pad;
        const double d = den[static_cast<std::size_t>(j)];
        if (d < 1e-12) {
            throw NumericError("zero overlap-add normalization at interior sample " +
                               std::to_string(i));
        }
        out.samples[static_cast<std::size_t>(i)] = acc[static_cast<std::size_t>(j)] / d;
    }
    return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& c) {
    MagnitudeSpectrogram m;
    m.bins = c.freq_bins;
    m.frames = c.frames;
    m.linear_bins = c.freq_bins;
    m.mag.resize(c.re.size());
    for (std::size_t i = 0; i < c.re.size(); ++i)
        m.mag[i] = std::hypot(c.re[i], c.im[i]);
    return m;
}

double snr_db(const std::vector<double>& reference, const std::vector<double>& estimate,
              std::size_t from, std::size_t to) {
    double sig = 0.0, err = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        sig += reference[i] * reference[i];
        const double d = reference[i] - estimate[i];
        err += d * d;
    }
    if (err <= 0.0) return 300.0;
    return 10.0 * std::log10(sig / err);
}

}  // namespace contsep::dsp
