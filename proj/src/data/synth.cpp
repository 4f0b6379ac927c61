#include <algorithm>
#include <cmath>

#include "contsep/data.hpp"
#include "contsep/error.hpp"
#include "contsep/rng.hpp"

namespace contsep::data {

namespace {

constexpr double kTau = 6.28318530717958647692;
constexpr double kFundLo = 110.0;
constexpr double kFundHi = 1760.0;
constexpr double kMinRatioGap = 1.05;
constexpr double kMaxPrototypeCos = 0.5;
constexpr double kFeatureNoise = 0.1;  // expected noise norm around the prototype
constexpr int kMaxPartials = 8;

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

void normalize(std::vector<double>& v) {
    double n2 = 0.0;
    for (const double x : v) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > 0.0) {
        for (auto& x : v) x /= n;
    }
}

std::vector<std::vector<double>> make_prototypes(int num_classes, int dim, Rng& rng,
                                                 const char* what) {
    if (dim < 2) throw ConfigError(std::string(what) + " feature dimension must be >= 2");
    std::vector<std::vector<double>> protos(static_cast<std::size_t>(num_classes));
    for (auto& p : protos) {
        p.resize(static_cast<std::size_t>(dim));
        for (auto& x : p) x = rng.normal();
        normalize(p);
    }
    // Push offending pairs apart until the cosine bound holds.
    for (int round = 0; round < 500; ++round) {
        bool violated = false;
        for (int i = 0; i < num_classes; ++i) {
            for (int j = i + 1; j < num_classes; ++j) {
                const double c = cosine(protos[static_cast<std::size_t>(i)],
                                        protos[static_cast<std::size_t>(j)]);
                if (std::fabs(c) > kMaxPrototypeCos) {
                    violated = true;
                    auto& vi = protos[static_cast<std::size_t>(i)];
                    auto& vj = protos[static_cast<std::size_t>(j)];
                    for (std::size_t d = 0; d < vj.size(); ++d) vj[d] -= 0.6 * c * vi[d];
                    normalize(vj);
                }
            }
        }
        if (!violated) return protos;
    }
    throw ConfigError(std::string(what) + " prototypes cannot satisfy the cosine bound in " +
                      std::to_string(dim) + " dimensions for " + std::to_string(num_classes) +
                      " classes");
}

}  // namespace

ClassBank generate_class_bank(int num_classes, int d_obj, int d_motion, std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("class bank needs at least 2 classes");
    ClassBank bank;
    bank.seed = seed;
    bank.d_obj = d_obj;
    bank.d_motion = d_motion;

    Rng root(seed);
    Rng fund_rng = root.fork("fundamentals");
    Rng timbre_rng = root.fork("timbres");
    Rng obj_rng = root.fork("object_prototypes");
    Rng mot_rng = root.fork("motion_prototypes");

    const double base_ratio =
        std::pow(kFundHi / kFundLo, 1.0 / static_cast<double>(num_classes - 1));
    if (base_ratio <= kMinRatioGap) {
        throw ConfigError("cannot place " + std::to_string(num_classes) +
                          " fundamentals in [110, 1760] Hz with a 5% gap");
    }
    // jitter bounded so ratio*(1-j)/(1+j) still clears the gap
    const double jitter = std::min(0.02, (base_ratio - kMinRatioGap) / (base_ratio + kMinRatioGap));

    bank.timbres.resize(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        auto& t = bank.timbres[static_cast<std::size_t>(c)];
        t.fundamental_hz = kFundLo * std::pow(base_ratio, c) *
                           (1.0 + fund_rng.uniform(-jitter, jitter));
        const double gamma = timbre_rng.uniform(0.6, 1.6);
        t.partial_amps.resize(kMaxPartials);
        double total = 0.0;
        for (int p = 0; p < kMaxPartials; ++p) {
            const double shape = std::pow(static_cast<double>(p + 1), -gamma);
            const double accent = 1.0 + 0.3 * timbre_rng.uniform(-1.0, 1.0);
            t.partial_amps[static_cast<std::size_t>(p)] = shape * accent;
            total += t.partial_amps[static_cast<std::size_t>(p)];
        }
        for (auto& a : t.partial_amps) a /= total;
        t.vibrato_rate_hz = timbre_rng.uniform(4.0, 7.0);
        t.vibrato_depth = timbre_rng.uniform(0.002, 0.008);
        t.attack_frac = timbre_rng.uniform(0.03, 0.12);
        t.release_frac = timbre_rng.uniform(0.08, 0.20);
    }

    bank.object_prototypes = make_prototypes(num_classes, d_obj, obj_rng, "object");
    bank.motion_prototypes = make_prototypes(num_classes, d_motion, mot_rng, "motion");
    return bank;
}

VideoSample render_clip(const ClassBank& bank, int class_id, std::uint64_t instance_seed,
                        double duration_s, int sample_rate_hz) {
    if (class_id < 0 || class_id >= bank.num_classes()) {
        throw InputError("class " + std::to_string(class_id) + " not in the bank");
    }
    const auto& t = bank.timbres[static_cast<std::size_t>(class_id)];
    Rng root(bank.seed);
    Rng rng = root.fork("clip/" + std::to_string(class_id) + "/" + std::to_string(instance_seed));

    const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate_hz);
    std::vector<double> x(n, 0.0);
    const double nyquist_cap = 0.45 * sample_rate_hz;
    const double vib_phase0 = rng.uniform(0.0, kTau);
    for (std::size_t p = 0; p < t.partial_amps.size(); ++p) {
        const double freq = t.fundamental_hz * static_cast<double>(p + 1);
        const double amp = t.partial_amps[p];
        const double phase0 = rng.uniform(0.0, kTau);
        if (freq >= nyquist_cap) continue;
        double phase = phase0;
        for (std::size_t i = 0; i < n; ++i) {
            const double vib = 1.0 + t.vibrato_depth *
                                         std::sin(kTau * t.vibrato_rate_hz * static_cast<double>(i) /
                                                      sample_rate_hz +
                                                  vib_phase0);
            phase += kTau * freq * vib / sample_rate_hz;
            x[i] += amp * std::sin(phase);
        }
    }
    // attack-sustain-release envelope with a little per-instance jitter
    const double attack = t.attack_frac * (1.0 + 0.2 * rng.uniform(-1.0, 1.0));
    const double release = t.release_frac * (1.0 + 0.2 * rng.uniform(-1.0, 1.0));
    const std::size_t na = static_cast<std::size_t>(attack * static_cast<double>(n));
    const std::size_t nr = static_cast<std::size_t>(release * static_cast<double>(n));
    for (std::size_t i = 0; i < na && i < n; ++i)
        x[i] *= static_cast<double>(i) / static_cast<double>(na);
    for (std::size_t i = 0; i < nr && i < n; ++i)
        x[n - 1 - i] *= static_cast<double>(i) / static_cast<double>(nr);

    double rms = 0.0, peak = 0.0;
    for (const double v : x) {
        rms += v * v;
        peak = std::max(peak, std::fabs(v));
    }
    rms = std::sqrt(rms / static_cast<double>(n));
    double scale = rms > 0.0 ? 0.15 / rms : 0.0;
    if (peak * scale > 0.98) scale = 0.98 / peak;
    // quantize onto the PCM16 grid used by the wav files
    for (auto& v : x) v = std::round(std::clamp(v * scale, -1.0, 1.0) * 32767.0) / 32767.0;

    VideoSample s;
    s.class_id = class_id;
    s.sample_id = static_cast<int>(instance_seed);
    s.waveform.sample_rate_hz = sample_rate_hz;
    s.waveform.samples = std::move(x);

    const auto draw_feature = [&](const std::vector<double>& proto) {
        std::vector<double> f(proto.size());
        const double sigma = kFeatureNoise / std::sqrt(static_cast<double>(proto.size()));
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = proto[i] + sigma * rng.normal();
        normalize(f);
        for (auto& v : f) v = static_cast<double>(static_cast<float>(v));  // float32 grid
        return f;
    };
    s.vis.object_feature = draw_feature(bank.object_prototypes[static_cast<std::size_t>(class_id)]);
    s.vis.motion_feature = draw_feature(bank.motion_prototypes[static_cast<std::size_t>(class_id)]);
    return s;
}

Dataset build_dataset(int num_classes, int samples_per_class, int d_obj, int d_motion,
                      std::uint64_t seed, double duration_s, int sample_rate_hz) {
    if (samples_per_class < 3) throw ConfigError("need at least 3 samples per class for splits");
    Dataset ds;
    ds.bank = generate_class_bank(num_classes, d_obj, d_motion, seed);
    ds.sample_rate_hz = sample_rate_hz;
    ds.duration_s = duration_s;
    ds.train_by_class.resize(static_cast<std::size_t>(num_classes));
    ds.val_by_class.resize(static_cast<std::size_t>(num_classes));
    ds.test_by_class.resize(static_cast<std::size_t>(num_classes));

    const int n_train = static_cast<int>(0.8 * samples_per_class);
    const int n_val = static_cast<int>(0.1 * samples_per_class);
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < samples_per_class; ++i) {
            const int idx = static_cast<int>(ds.samples.size());
            ds.samples.push_back(
                render_clip(ds.bank, c, static_cast<std::uint64_t>(i), duration_s, sample_rate_hz));
            auto& slot = i < n_train                ? ds.train_by_class[static_cast<std::size_t>(c)]
                         : i < n_train + n_val      ? ds.val_by_class[static_cast<std::size_t>(c)]
                                                    : ds.test_by_class[static_cast<std::size_t>(c)];
            slot.push_back(idx);
        }
    }
    return ds;
}

}  // namespace contsep::data
