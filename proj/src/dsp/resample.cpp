#include <algorithm>
#include <cmath>

#include "contsep/dsp.hpp"
#include "contsep/error.hpp"

namespace contsep::dsp {

namespace {

// Geometric bin positions spanning [1, top].
std::vector<double> geometric_grid(std::int64_t out_bins, double top) {
    std::vector<double> pos(static_cast<std::size_t>(out_bins));
    const double step = std::log(top) / static_cast<double>(out_bins - 1);
    for (std::int64_t j = 0; j < out_bins; ++j)
        pos[static_cast<std::size_t>(j)] = std::exp(step * static_cast<double>(j));
    return pos;
}

std::vector<double> to_geometric(const std::vector<double>& values, std::int64_t in_bins,
                                 std::int64_t frames, std::int64_t out_bins) {
    const auto pos = geometric_grid(out_bins, static_cast<double>(in_bins - 1));
    std::vector<double> out(static_cast<std::size_t>(out_bins * frames));
    for (std::int64_t j = 0; j < out_bins; ++j) {
        const double p = pos[static_cast<std::size_t>(j)];
        std::int64_t i0 = static_cast<std::int64_t>(p);
        i0 = std::min(i0, in_bins - 2);
        const double frac = p - static_cast<double>(i0);
        const double* lo = values.data() + i0 * frames;
        const double* hi = values.data() + (i0 + 1) * frames;
        double* dst = out.data() + j * frames;
        for (std::int64_t t = 0; t < frames; ++t) dst[t] = (1.0 - frac) * lo[t] + frac * hi[t];
    }
    return out;
}

std::vector<double> from_geometric(const std::vector<double>& values, std::int64_t log_bins,
                                   std::int64_t frames, std::int64_t linear_bins) {
    std::vector<double> out(static_cast<std::size_t>(linear_bins * frames));
    const double denom = std::log(static_cast<double>(linear_bins - 1));
    for (std::int64_t i = 0; i < linear_bins; ++i) {
        double p = 0.0;
        if (i >= 1) p = static_cast<double>(log_bins - 1) * std::log(static_cast<double>(i)) / denom;
        std::int64_t j0 = static_cast<std::int64_t>(p);
        j0 = std::min(j0, log_bins - 2);
        const double frac = std::clamp(p - static_cast<double>(j0), 0.0, 1.0);
        const double* lo = values.data() + j0 * frames;
        const double* hi = values.data() + (j0 + 1) * frames;
        double* dst = out.data() + i * frames;
        for (std::int64_t t = 0; t < frames; ++t) dst[t] = (1.0 - frac) * lo[t] + frac * hi[t];
    }
    return out;
}

}  // namespace

MagnitudeSpectrogram log_freq_resample(const MagnitudeSpectrogram& m, std::int64_t out_bins) {
    if (out_bins < 2) throw ConfigError("log-frequency resample needs at least 2 output bins");
    if (m.log_grid) throw ContractError("input spectrogram is already on the log grid");
    if (m.bins < 3) throw ConfigError("too few linear bins to resample");
    MagnitudeSpectrogram out;
    out.bins = out_bins;
    out.frames = m.frames;
    out.log_grid = true;
    out.linear_bins = m.bins;
    out.mag = to_geometric(m.mag, m.bins, m.frames, out_bins);
    return out;
}

MagnitudeSpectrogram log_freq_unresample(const MagnitudeSpectrogram& m, std::int64_t linear_bins) {
    if (!m.log_grid) throw ContractError("input spectrogram is not on the log grid");
    if (linear_bins < 3) throw ConfigError("too few linear bins");
    MagnitudeSpectrogram out;
    out.bins = linear_bins;
    out.frames = m.frames;
    out.log_grid = false;
    out.linear_bins = linear_bins;
    out.mag = from_geometric(m.mag, m.bins, m.frames, linear_bins);
    return out;
}

RatioMask ratio_mask(const MagnitudeSpectrogram& source, const MagnitudeSpectrogram& mixture) {
    if (source.bins != mixture.bins || source.frames != mixture.frames ||
        source.log_grid != mixture.log_grid) {
        throw DimensionError("ratio mask operands disagree: " + std::to_string(source.bins) + "x" +
                             std::to_string(source.frames) + " vs " + std::to_string(mixture.bins) +
                             "x" + std::to_string(mixture.frames));
    }
    RatioMask mask;
    mask.bins = source.bins;
    mask.frames = source.frames;
    mask.log_grid = source.log_grid;
    mask.linear_bins = source.linear_bins;
    mask.values.resize(source.mag.size());
    for (std::size_t i = 0; i < source.mag.size(); ++i) {
        const double r = source.mag[i] / (mixture.mag[i] + kMaskEps);
        mask.values[i] = std::clamp(r, 0.0, 1.0);
    }
    return mask;
}

Waveform apply_mask_and_reconstruct(const RatioMask& mask, const ComplexSpectrogram& mixture,
                                    std::int64_t target_len, int sample_rate_hz) {
    std::vector<double> linear;
    const std::vector<double>* values = &mask.values;
    if (mask.log_grid) {
        if (mask.linear_bins != mixture.freq_bins || mask.frames != mixture.frames) {
            throw DimensionError("log-grid mask does not map onto the mixture spectrogram");
        }
        linear = from_geometric(mask.values, mask.bins, mask.frames, mixture.freq_bins);
        values = &linear;
    } else if (mask.bins != mixture.freq_bins || mask.frames != mixture.frames) {
        throw DimensionError("mask shape does not match the mixture spectrogram");
    }

    ComplexSpectrogram masked;
    masked.freq_bins = mixture.freq_bins;
    masked.frames = mixture.frames;
    masked.window_len = mixture.window_len;
    masked.hop = mixture.hop;
    masked.re.resize(mixture.re.size());
    masked.im.resize(mixture.im.size());
    for (std::size_t i = 0; i < mixture.re.size(); ++i) {
        masked.re[i] = (*values)[i] * mixture.re[i];
        masked.im[i] = (*values)[i] * mixture.im[i];
    }
    return istft(masked, target_len, sample_rate_hz);
}

}  // namespace contsep::dsp
