#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace contsep::dsp {

struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = 0;
};

// Row-major (freq_bins x frames).
struct ComplexSpectrogram {
    std::vector<double> re, im;
    std::int64_t freq_bins = 0;
    std::int64_t frames = 0;
    int window_len = 0;
    int hop = 0;

    std::size_t idx(std::int64_t b, std::int64_t t) const {
        return static_cast<std::size_t>(b * frames + t);
    }
};

struct MagnitudeSpectrogram {
    std::vector<double> mag;
    std::int64_t bins = 0;
    std::int64_t frames = 0;
    bool log_grid = false;
    // retained so masks can be mapped back onto the linear grid
    std::int64_t linear_bins = 0;

    std::size_t idx(std::int64_t b, std::int64_t t) const {
        return static_cast<std::size_t>(b * frames + t);
    }
};

struct RatioMask {
    std::vector<double> values;
    std::int64_t bins = 0;
    std::int64_t frames = 0;
    bool log_grid = false;
    std::int64_t linear_bins = 0;
};

inline constexpr double kMaskEps = 1e-8;

// Hann-windowed STFT with reflective center padding; frame count is
// 1 + len/hop. window_len must be even and >= hop.
ComplexSpectrogram stft(const Waveform& w, int window_len, int hop);

// Same, with the frame axis trimmed or zero-padded to exactly `frames`.
ComplexSpectrogram stft_fixed(const Waveform& w, int window_len, int hop, std::int64_t frames);

// Weighted overlap-add reconstruction normalized by the summed squared
// window; exact up to edge effects even without a COLA-compliant hop.
Waveform istft(const ComplexSpectrogram& c, std::int64_t target_len, int sample_rate_hz);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& c);

// Linear interpolation of each frame onto a geometric bin grid spanning
// [1, bins-1], and its approximate inverse.
MagnitudeSpectrogram log_freq_resample(const MagnitudeSpectrogram& m, std::int64_t out_bins);
MagnitudeSpectrogram log_freq_unresample(const MagnitudeSpectrogram& m, std::int64_t linear_bins);

RatioMask ratio_mask(const MagnitudeSpectrogram& source, const MagnitudeSpectrogram& mixture);

// Masked magnitude recombined with the mixture phase, then iSTFT. A mask on
// the log grid is first interpolated back to the linear grid.
Waveform apply_mask_and_reconstruct(const RatioMask& mask, const ComplexSpectrogram& mixture,
                                    std::int64_t target_len, int sample_rate_hz);

// Interior SNR in dB between reference and estimate over [from, to).
double snr_db(const std::vector<double>& reference, const std::vector<double>& estimate,
              std::size_t from, std::size_t to);

// ---- file formats -------------------------------------------------------

// Single-channel RIFF/WAVE, 16-bit PCM. Samples quantized by round(x*32767).
void write_wav(const std::string& path, const Waveform& w);
Waveform read_wav(const std::string& path);

// Raw little-endian float32 array with a JSON sidecar at <path>.json holding
// {shape, dtype, grid}. grid is "linear", "log", or omitted.
void write_f32(const std::string& path, const std::vector<double>& data,
               const std::vector<std::int64_t>& shape, const std::string& grid = "");
std::vector<double> read_f32(const std::string& path, std::vector<std::int64_t>* shape_out,
                             std::string* grid_out = nullptr);

}  // namespace contsep::dsp
