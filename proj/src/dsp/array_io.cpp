#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "contsep/dsp.hpp"
#include "contsep/error.hpp"

namespace contsep::dsp {

void write_f32(const std::string& path, const std::vector<double>& data,
               const std::vector<std::int64_t>& shape, const std::string& grid) {
    std::int64_t numel = 1;
    for (const auto d : shape) numel *= d;
    if (numel != static_cast<std::int64_t>(data.size())) {
        throw DimensionError("array size does not match shape for '" + path + "'");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    for (const double x : data) {
        const float f = static_cast<float>(x);
        os.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
    if (!os) throw InputError("write failed for '" + path + "'");

    nlohmann::json sidecar;
    sidecar["shape"] = shape;
    sidecar["dtype"] = "float32";
    if (!grid.empty()) sidecar["grid"] = grid;
    std::ofstream js(path + ".json");
    if (!js) throw InputError("cannot open '" + path + ".json' for writing");
    js << sidecar.dump(2) << "\n";
}

std::vector<double> read_f32(const std::string& path, std::vector<std::int64_t>* shape_out,
                             std::string* grid_out) {
    std::ifstream js(path + ".json");
    if (!js) throw IngestError("missing sidecar '" + path + ".json'");
    nlohmann::json sidecar;
    try {
        js >> sidecar;
    } catch (const std::exception& e) {
        throw IngestError("bad sidecar '" + path + ".json': " + e.what());
    }
    if (sidecar.value("dtype", "") != "float32") {
        throw IngestError("'" + path + "': unsupported dtype '" + sidecar.value("dtype", "") + "'");
    }
    std::vector<std::int64_t> shape = sidecar.at("shape").get<std::vector<std::int64_t>>();
    std::int64_t numel = 1;
    for (const auto d : shape) numel *= d;

    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestError("cannot open '" + path + "'");
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (auto& x : data) {
        float f = 0;
        is.read(reinterpret_cast<char*>(&f), sizeof(float));
        x = static_cast<double>(f);
    }
    if (!is) throw IngestError("'" + path + "': fewer values than the sidecar shape implies");
    if (shape_out) *shape_out = std::move(shape);
    if (grid_out) *grid_out = sidecar.value("grid", "");
    return data;
}

}  // namespace contsep::dsp
