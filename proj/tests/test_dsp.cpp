#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "contsep/dsp.hpp"
#include "contsep/error.hpp"
#include "contsep/fft.hpp"
#include "contsep/rng.hpp"

using namespace contsep;
using namespace contsep::dsp;

namespace {

constexpr double kPi = 3.14159265358979323846;

Waveform sine_wave(double freq, int sample_rate, double seconds, double amp = 0.5) {
    Waveform w;
    w.sample_rate_hz = sample_rate;
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / sample_rate);
    return w;
}

Waveform noise_wave(Rng& rng, int sample_rate, double seconds, double amp = 0.3) {
    Waveform w;
    w.sample_rate_hz = sample_rate;
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    w.samples.resize(n);
    for (auto& x : w.samples) x = amp * rng.uniform(-1.0, 1.0);
    return w;
}

}  // namespace

TEST_CASE("fft matches a direct dft oracle at profile sizes") {
    Rng rng(41);
    for (const std::int64_t n : {1, 2, 3, 4, 8, 12, 127, 254, 1022}) {
        std::vector<double> re(static_cast<std::size_t>(n)), im(static_cast<std::size_t>(n));
        for (auto& x : re) x = rng.uniform(-1, 1);
        for (auto& x : im) x = rng.uniform(-1, 1);
        std::vector<double> fre(re.size()), fim(re.size());
        const Fft fft(n);
        fft.forward(re.data(), im.data(), fre.data(), fim.data());
        for (std::int64_t k = 0; k < n; ++k) {
            double wr = 0.0, wi = 0.0;
            for (std::int64_t t = 0; t < n; ++t) {
                const double ang = -2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n);
                wr += re[static_cast<std::size_t>(t)] * std::cos(ang) -
                      im[static_cast<std::size_t>(t)] * std::sin(ang);
                wi += re[static_cast<std::size_t>(t)] * std::sin(ang) +
                      im[static_cast<std::size_t>(t)] * std::cos(ang);
            }
            CHECK(std::fabs(fre[static_cast<std::size_t>(k)] - wr) < 1e-8 * std::max(1.0, std::fabs(wr)) + 1e-8);
            CHECK(std::fabs(fim[static_cast<std::size_t>(k)] - wi) < 1e-8 * std::max(1.0, std::fabs(wi)) + 1e-8);
        }
        // inverse round trip
        std::vector<double> rre(re.size()), rim(re.size());
        fft.inverse(fre.data(), fim.data(), rre.data(), rim.data());
        for (std::size_t i = 0; i < re.size(); ++i) {
            CHECK(std::fabs(rre[i] - re[i]) < 1e-10);
            CHECK(std::fabs(rim[i] - im[i]) < 1e-10);
        }
    }
}

TEST_CASE("zero waveform produces an all-zero spectrogram") {
    Waveform w;
    w.sample_rate_hz = 8000;
    w.samples.assign(16000, 0.0);
    const auto c = stft(w, 254, 64);
    for (const double v : c.re) CHECK(v == 0.0);
    for (const double v : c.im) CHECK(v == 0.0);

    // and back: all-zero spectrogram reconstructs silence
    const auto y = istft(c, 16000, 8000);
    for (const double v : y.samples) CHECK(v == 0.0);
}

TEST_CASE("stft parameter and input validation") {
    Waveform w = sine_wave(440.0, 8000, 1.0);
    CHECK_THROWS_AS((void)stft(w, 64, 128), ConfigError);   // window < hop
    Waveform tiny;
    tiny.sample_rate_hz = 8000;
    tiny.samples.assign(100, 0.1);
    CHECK_THROWS_AS((void)stft(tiny, 254, 64), InputError);  // too short
}

TEST_CASE("1 kHz sine at the paper profile peaks at bin 93") {
    const Waveform w = sine_wave(1000.0, 11025, 2.0);
    const auto c = stft(w, 1022, 256);
    CHECK(c.freq_bins == 512);
    const auto m = magnitude(c);
    // average magnitude across frames, find the peak bin
    std::int64_t peak = 0;
    double best = -1.0;
    for (std::int64_t b = 0; b < m.bins; ++b) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < m.frames; ++t) acc += m.mag[m.idx(b, t)];
        if (acc > best) {
            best = acc;
            peak = b;
        }
    }
    CHECK(peak == 93);  // round(1000 * 1022 / 11025)
}

TEST_CASE("stft frame values match an independent windowed-dft oracle") {
    Rng rng(4242);
    const Waveform w = noise_wave(rng, 8000, 0.5);
    const int win = 254, hop = 64;
    const auto c = stft(w, win, hop);

    // oracle: rebuild the reflect-padded, Hann-windowed frame and DFT it
    const std::int64_t len = static_cast<std::int64_t>(w.samples.size());
    const std::int64_t pad = win / 2;
    const std::int64_t frame_idx = 7;
    std::vector<double> frame(win);
    for (int i = 0; i < win; ++i) {
        std::int64_t j = frame_idx * hop + i - pad;
        while (j < 0 || j >= len) {
            if (j < 0) j = -j;
            if (j >= len) j = 2 * len - 2 - j;
        }
        const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(win));
        frame[static_cast<std::size_t>(i)] = w.samples[static_cast<std::size_t>(j)] * hann;
    }
    for (const std::int64_t b : {0, 1, 37, 93, 127}) {
        double wr = 0.0, wi = 0.0;
        for (int t = 0; t < win; ++t) {
            const double ang = -2.0 * kPi * static_cast<double>(b * t) / win;
            wr += frame[static_cast<std::size_t>(t)] * std::cos(ang);
            wi += frame[static_cast<std::size_t>(t)] * std::sin(ang);
        }
        CHECK(std::fabs(c.re[c.idx(b, frame_idx)] - wr) < 1e-9);
        CHECK(std::fabs(c.im[c.idx(b, frame_idx)] - wi) < 1e-9);
    }
}

TEST_CASE("paper profile: 6 s at 11025 Hz gives 512 bins, frames fixed to 256") {
    Rng rng(5);
    const Waveform w = noise_wave(rng, 11025, 6.0);
    const auto c = stft_fixed(w, 1022, 256, 256);
    CHECK(c.freq_bins == 512);
    CHECK(c.frames == 256);
}

TEST_CASE("istft of stft reconstructs with interior SNR >= 60 dB") {
    Rng rng(6);
    struct Profile {
        int sr, win, hop;
    };
    for (const Profile p : {Profile{8000, 254, 64}, Profile{11025, 1022, 256}}) {
        const Waveform noise = noise_wave(rng, p.sr, 1.5);
        const Waveform sine = sine_wave(523.25, p.sr, 1.5);
        for (const Waveform* src : {&noise, &sine}) {
            const auto c = stft(*src, p.win, p.hop);
            const auto y = istft(c, static_cast<std::int64_t>(src->samples.size()), p.sr);
            const std::size_t margin = static_cast<std::size_t>(p.win);
            const double snr =
                snr_db(src->samples, y.samples, margin, src->samples.size() - margin);
            CHECK(snr >= 60.0);
        }
    }
}

TEST_CASE("per-frame parseval energy consistency within 1e-6") {
    Rng rng(7);
    const Waveform w = noise_wave(rng, 8000, 1.0);
    const int win = 254, hop = 64;
    const auto c = stft(w, win, hop);

    const std::int64_t len = static_cast<std::int64_t>(w.samples.size());
    const std::int64_t pad = win / 2;
    for (const std::int64_t m : {0L, 5L, 60L, c.frames - 1}) {
        double time_energy = 0.0;
        for (int i = 0; i < win; ++i) {
            std::int64_t j = m * hop + i - pad;
            while (j < 0 || j >= len) {
                if (j < 0) j = -j;
                if (j >= len) j = 2 * len - 2 - j;
            }
            const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(win));
            const double v = w.samples[static_cast<std::size_t>(j)] * hann;
            time_energy += v * v;
        }
        double spec_energy = 0.0;
        for (std::int64_t b = 0; b < c.freq_bins; ++b) {
            const double p2 = c.re[c.idx(b, m)] * c.re[c.idx(b, m)] +
                              c.im[c.idx(b, m)] * c.im[c.idx(b, m)];
            const bool shared = b == 0 || b == c.freq_bins - 1;  // DC and Nyquist
            spec_energy += shared ? p2 : 2.0 * p2;
        }
        spec_energy /= static_cast<double>(win);
        CHECK(std::fabs(spec_energy - time_energy) <= 1e-6 * time_energy);
    }
}

TEST_CASE("log-frequency resample basics") {
    // constant spectrogram stays constant
    MagnitudeSpectrogram m;
    m.bins = 128;
    m.frames = 10;
    m.linear_bins = 128;
    m.mag.assign(1280, 2.5);
    const auto r = log_freq_resample(m, 64);
    CHECK(r.bins == 64);
    CHECK(r.frames == 10);
    CHECK(r.log_grid);
    for (const double v : r.mag) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));

    CHECK_THROWS_AS((void)log_freq_resample(m, 1), ConfigError);
}

TEST_CASE("paper-profile 512->256->512 round trip on a smooth spectrum") {
    MagnitudeSpectrogram m;
    m.bins = 512;
    m.frames = 4;
    m.linear_bins = 512;
    m.mag.resize(static_cast<std::size_t>(512 * 4));
    for (std::int64_t b = 0; b < 512; ++b) {
        const double v = 1.0 + 0.5 * std::cos(kPi * static_cast<double>(b) / 511.0);
        for (std::int64_t t = 0; t < 4; ++t) m.mag[m.idx(b, t)] = v * (1.0 + 0.1 * static_cast<double>(t));
    }
    const auto down = log_freq_resample(m, 256);
    CHECK(down.bins == 256);  // T,F=256 grid of the paper profile
    const auto up = log_freq_unresample(down, 512);
    CHECK(up.bins == 512);
    double worst = 0.0;
    for (std::size_t i = 0; i < m.mag.size(); ++i)
        worst = std::max(worst, std::fabs(up.mag[i] - m.mag[i]) / m.mag[i]);
    CHECK(worst <= 0.05);

    // non-negativity preserved on random non-negative input
    Rng rng(8);
    for (auto& v : m.mag) v = rng.uniform(0.0, 3.0);
    const auto down2 = log_freq_resample(m, 256);
    for (const double v : down2.mag) CHECK(v >= 0.0);
}

TEST_CASE("ratio mask definition, clamping and monotonicity") {
    MagnitudeSpectrogram src, mix;
    src.bins = mix.bins = 4;
    src.frames = mix.frames = 3;
    src.linear_bins = mix.linear_bins = 4;
    src.mag.assign(12, 1.0);
    mix.mag.assign(12, 1.0);

    // source == mixture -> ones (up to the epsilon in the denominator)
    auto ones = ratio_mask(src, mix);
    for (const double v : ones.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-7));

    // source == 0 -> zeros
    src.mag.assign(12, 0.0);
    auto zeros = ratio_mask(src, mix);
    for (const double v : zeros.values) CHECK(v == 0.0);

    // random case: mask * (mixture + eps) == min(source, mixture) entrywise
    Rng rng(9);
    for (auto& v : src.mag) v = rng.uniform(0.0, 2.0);
    for (auto& v : mix.mag) v = rng.uniform(0.0, 2.0);
    const auto mask = ratio_mask(src, mix);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        CHECK(mask.values[i] >= 0.0);
        CHECK(mask.values[i] <= 1.0);
        const double recon = mask.values[i] * (mix.mag[i] + kMaskEps);
        CHECK(std::fabs(recon - std::min(src.mag[i], mix.mag[i])) < 1e-6);
    }

    // monotone in source for fixed mixture
    MagnitudeSpectrogram src2 = src;
    for (auto& v : src2.mag) v += 0.1;
    const auto mask2 = ratio_mask(src2, mix);
    for (std::size_t i = 0; i < mask.values.size(); ++i) CHECK(mask2.values[i] >= mask.values[i]);

    MagnitudeSpectrogram bad = mix;
    bad.frames = 2;
    bad.mag.resize(8);
    CHECK_THROWS_AS((void)ratio_mask(src, bad), DimensionError);
}

TEST_CASE("identity and zero masks through the reconstruction path") {
    Rng rng(10);
    const Waveform w = noise_wave(rng, 8000, 1.0);
    const auto c = stft(w, 254, 64);

    RatioMask ones;
    ones.bins = c.freq_bins;
    ones.frames = c.frames;
    ones.linear_bins = c.freq_bins;
    ones.values.assign(static_cast<std::size_t>(c.freq_bins * c.frames), 1.0);
    const auto y = apply_mask_and_reconstruct(ones, c, static_cast<std::int64_t>(w.samples.size()), 8000);
    CHECK(snr_db(w.samples, y.samples, 254, w.samples.size() - 254) >= 60.0);

    RatioMask zeros = ones;
    zeros.values.assign(zeros.values.size(), 0.0);
    const auto silent = apply_mask_and_reconstruct(zeros, c, 8000, 8000);
    for (const double v : silent.samples) CHECK(v == 0.0);
}

TEST_CASE("wav round trip is exact after one quantization") {
    Rng rng(11);
    Waveform w = noise_wave(rng, 8000, 0.1);
    const auto tmp = std::filesystem::temp_directory_path() / "contsep_wav_test.wav";
    write_wav(tmp.string(), w);
    const Waveform r1 = read_wav(tmp.string());
    CHECK(r1.sample_rate_hz == 8000);
    CHECK(r1.samples.size() == w.samples.size());
    write_wav(tmp.string(), r1);
    const Waveform r2 = read_wav(tmp.string());
    for (std::size_t i = 0; i < r1.samples.size(); ++i) CHECK(r1.samples[i] == r2.samples[i]);
    std::filesystem::remove(tmp);
}

TEST_CASE("f32 sidecar round trip and validation") {
    const auto tmp = (std::filesystem::temp_directory_path() / "contsep_arr_test.f32").string();
    const std::vector<double> data = {1.0, -2.5, 3.25, 0.0, 7.5, -0.125};
    write_f32(tmp, data, {2, 3}, "log");
    std::vector<std::int64_t> shape;
    std::string grid;
    const auto back = read_f32(tmp, &shape, &grid);
    CHECK(shape == std::vector<std::int64_t>{2, 3});
    CHECK(grid == "log");
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(back[i] == data[i]);  // exactly representable

    CHECK_THROWS_AS((void)read_f32(tmp + ".missing", nullptr), IngestError);
    std::filesystem::remove(tmp);
    std::filesystem::remove(tmp + ".json");
}
