#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "contsep/data.hpp"
#include "contsep/error.hpp"

namespace contsep::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json bank_to_json(const ClassBank& bank) {
    json j;
    j["seed"] = bank.seed;
    j["d_obj"] = bank.d_obj;
    j["d_motion"] = bank.d_motion;
    json classes = json::array();
    for (int c = 0; c < bank.num_classes(); ++c) {
        const auto& t = bank.timbres[static_cast<std::size_t>(c)];
        json e;
        e["fundamental_hz"] = t.fundamental_hz;
        e["partial_amps"] = t.partial_amps;
        e["vibrato_rate_hz"] = t.vibrato_rate_hz;
        e["vibrato_depth"] = t.vibrato_depth;
        e["attack_frac"] = t.attack_frac;
        e["release_frac"] = t.release_frac;
        e["object_prototype"] = bank.object_prototypes[static_cast<std::size_t>(c)];
        e["motion_prototype"] = bank.motion_prototypes[static_cast<std::size_t>(c)];
        classes.push_back(e);
    }
    j["classes"] = classes;
    return j;
}

}  // namespace

void export_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream os(fs::path(dir) / "bank.json");
        if (!os) throw InputError("cannot write bank.json under '" + dir + "'");
        os << bank_to_json(ds.bank).dump(2) << "\n";
    }
    json manifest;
    manifest["sample_rate_hz"] = ds.sample_rate_hz;
    manifest["duration_s"] = ds.duration_s;
    manifest["d_obj"] = ds.bank.d_obj;
    manifest["d_motion"] = ds.bank.d_motion;
    manifest["num_classes"] = ds.num_classes();
    json entries = json::array();
    for (const auto& s : ds.samples) {
        const std::string cls = std::to_string(s.class_id);
        const std::string id = std::to_string(s.sample_id);
        const std::string wav_rel = "samples/" + cls + "/" + id + ".wav";
        const std::string obj_rel = "features/" + cls + "/" + id + ".obj.f32";
        const std::string mot_rel = "features/" + cls + "/" + id + ".mot.f32";
        fs::create_directories(fs::path(dir) / "samples" / cls);
        fs::create_directories(fs::path(dir) / "features" / cls);
        dsp::write_wav((fs::path(dir) / wav_rel).string(), s.waveform);
        dsp::write_f32((fs::path(dir) / obj_rel).string(), s.vis.object_feature,
                       {static_cast<std::int64_t>(s.vis.object_feature.size())});
        dsp::write_f32((fs::path(dir) / mot_rel).string(), s.vis.motion_feature,
                       {static_cast<std::int64_t>(s.vis.motion_feature.size())});
        json e;
        e["class"] = s.class_id;
        e["id"] = s.sample_id;
        e["wav"] = wav_rel;
        e["obj"] = obj_rel;
        e["mot"] = mot_rel;
        entries.push_back(e);
    }
    manifest["samples"] = entries;
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw InputError("cannot write manifest.json under '" + dir + "'");
    os << manifest.dump(2) << "\n";
}

std::vector<VideoSample> ingest_precomputed(const std::string& manifest_path, int d_obj,
                                            int d_motion) {
    std::ifstream is(manifest_path);
    if (!is) throw IngestError("cannot open manifest '" + manifest_path + "'");
    json manifest;
    try {
        is >> manifest;
    } catch (const std::exception& e) {
        throw IngestError("bad manifest '" + manifest_path + "': " + e.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<VideoSample> out;
    for (const auto& e : manifest.value("samples", json::array())) {
        const std::string name = "class " + e.value("class", json(-1)).dump() + " id " +
                                 e.value("id", json(-1)).dump();
        VideoSample s;
        s.class_id = e.at("class").get<int>();
        s.sample_id = e.at("id").get<int>();
        const auto resolve = [&](const std::string& rel) { return (base / rel).string(); };
        try {
            s.waveform = dsp::read_wav(resolve(e.at("wav").get<std::string>()));
            s.vis.object_feature = dsp::read_f32(resolve(e.at("obj").get<std::string>()), nullptr);
            s.vis.motion_feature = dsp::read_f32(resolve(e.at("mot").get<std::string>()), nullptr);
        } catch (const std::exception& ex) {
            throw IngestError("entry " + name + ": " + ex.what());
        }
        if (static_cast<int>(s.vis.object_feature.size()) != d_obj) {
            throw IngestError("entry " + name + ": object feature has dim " +
                              std::to_string(s.vis.object_feature.size()) + ", expected " +
                              std::to_string(d_obj));
        }
        if (static_cast<int>(s.vis.motion_feature.size()) != d_motion) {
            throw IngestError("entry " + name + ": motion feature has dim " +
                              std::to_string(s.vis.motion_feature.size()) + ", expected " +
                              std::to_string(d_motion));
        }
        out.push_back(std::move(s));
    }
    return out;
}

Dataset ingest_dataset(const std::string& dir, int d_obj, int d_motion) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    std::ifstream is(manifest_path);
    if (!is) throw IngestError("cannot open manifest '" + manifest_path + "'");
    json manifest;
    is >> manifest;

    Dataset ds;
    ds.sample_rate_hz = manifest.at("sample_rate_hz").get<int>();
    ds.duration_s = manifest.at("duration_s").get<double>();
    const int num_classes = manifest.at("num_classes").get<int>();
    ds.samples = ingest_precomputed(manifest_path, d_obj, d_motion);
    ds.bank.d_obj = d_obj;
    ds.bank.d_motion = d_motion;

    // rebuild positional 80/10/10 splits per class, ordered by sample id
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
        const int c = ds.samples[static_cast<std::size_t>(i)].class_id;
        if (c < 0 || c >= num_classes)
            throw IngestError("sample class " + std::to_string(c) + " out of range");
        by_class[static_cast<std::size_t>(c)].push_back(i);
    }
    ds.train_by_class.resize(static_cast<std::size_t>(num_classes));
    ds.val_by_class.resize(static_cast<std::size_t>(num_classes));
    ds.test_by_class.resize(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        auto& all = by_class[static_cast<std::size_t>(c)];
        std::sort(all.begin(), all.end(), [&](int a, int b) {
            return ds.samples[static_cast<std::size_t>(a)].sample_id <
                   ds.samples[static_cast<std::size_t>(b)].sample_id;
        });
        const int n = static_cast<int>(all.size());
        const int n_train = static_cast<int>(0.8 * n);
        const int n_val = static_cast<int>(0.1 * n);
        for (int i = 0; i < n; ++i) {
            auto& slot = i < n_train           ? ds.train_by_class[static_cast<std::size_t>(c)]
                         : i < n_train + n_val ? ds.val_by_class[static_cast<std::size_t>(c)]
                                               : ds.test_by_class[static_cast<std::size_t>(c)];
            slot.push_back(all[static_cast<std::size_t>(i)]);
        }
    }
    return ds;
}

}  // namespace contsep::data
