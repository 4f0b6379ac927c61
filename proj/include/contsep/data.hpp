#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contsep/dsp.hpp"

namespace contsep::data {

// Class-conditioned harmonic timbre. Distinct fundamentals keep ground-truth
// ratio masks close to binary, so separation quality is measurable with a
// small model.
struct TimbreSpec {
    double fundamental_hz = 0.0;
    std::vector<double> partial_amps;
    double vibrato_rate_hz = 0.0;
    double vibrato_depth = 0.0;
    double attack_frac = 0.0;
    double release_frac = 0.0;
};

struct ClassBank {
    std::vector<TimbreSpec> timbres;
    std::vector<std::vector<double>> object_prototypes;
    std::vector<std::vector<double>> motion_prototypes;
    int d_obj = 0;
    int d_motion = 0;
    std::uint64_t seed = 0;

    int num_classes() const { return static_cast<int>(timbres.size()); }
};

struct VisualFeatures {
    std::vector<double> object_feature;
    std::vector<double> motion_feature;
};

struct VideoSample {
    dsp::Waveform waveform;
    VisualFeatures vis;
    int class_id = -1;
    int sample_id = -1;
};

// Fundamentals log-spaced over [110, 1760] Hz with jitter bounded so any two
// stay >= 5% apart; prototype vectors are resampled/decorrelated until all
// pairwise cosines are <= 0.5.
ClassBank generate_class_bank(int num_classes, int d_obj, int d_motion, std::uint64_t seed);

// Deterministic in (bank.seed, class_id, instance_seed), including the
// float32/PCM16 grids used on disk, so export/ingest round trips are bitwise.
VideoSample render_clip(const ClassBank& bank, int class_id, std::uint64_t instance_seed,
                        double duration_s, int sample_rate_hz);

struct Dataset {
    ClassBank bank;
    std::vector<VideoSample> samples;
    // per-class sample indices, 80/10/10 in sample order
    std::vector<std::vector<int>> train_by_class;
    std::vector<std::vector<int>> val_by_class;
    std::vector<std::vector<int>> test_by_class;
    int sample_rate_hz = 0;
    double duration_s = 0.0;
    int num_classes() const { return static_cast<int>(train_by_class.size()); }
};

Dataset build_dataset(int num_classes, int samples_per_class, int d_obj, int d_motion,
                      std::uint64_t seed, double duration_s, int sample_rate_hz);

// Directory layout: bank.json, manifest.json, samples/<class>/<id>.wav,
// features/<class>/<id>.{obj,mot}.f32 with JSON sidecars.
void export_dataset(const Dataset& ds, const std::string& dir);

// Bridge for externally computed features: the manifest lists
// {class, wav, obj, mot} entries. Validates feature dims.
std::vector<VideoSample> ingest_precomputed(const std::string& manifest_path, int d_obj,
                                            int d_motion);

// Full dataset (with splits rebuilt) from an exported directory.
Dataset ingest_dataset(const std::string& dir, int d_obj, int d_motion);

}  // namespace contsep::data
