#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "contsep/dsp.hpp"
#include "contsep/error.hpp"

namespace contsep::dsp {

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    os.write(b, 4);
}
void put_u16(std::ofstream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    os.write(b, 2);
}
std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const Waveform& w) {
    if (w.sample_rate_hz <= 0) throw InputError("waveform sample rate must be positive");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    const std::uint32_t nsamples = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_bytes = nsamples * 2;
    const std::uint32_t sr = static_cast<std::uint32_t>(w.sample_rate_hz);

    os.write("RIFF", 4);
    put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 1);  // PCM
    put_u16(os, 1);  // mono
    put_u32(os, sr);
    put_u32(os, sr * 2);
    put_u16(os, 2);
    put_u16(os, 16);
    os.write("data", 4);
    put_u32(os, data_bytes);
    for (const double x : w.samples) {
        const double scaled = std::round(std::clamp(x, -1.0, 1.0) * 32767.0);
        const std::int16_t q = static_cast<std::int16_t>(scaled);
        put_u16(os, static_cast<std::uint16_t>(q));
    }
    if (!os) throw InputError("write failed for '" + path + "'");
}

Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw IngestError("'" + path + "' is not a RIFF/WAVE file");
    }
    std::size_t off = 12;
    int sample_rate = 0;
    int channels = 0;
    int bits = 0;
    std::vector<double> samples;
    bool have_fmt = false, have_data = false;
    while (off + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + off);
        const std::uint32_t size = get_u32(bytes.data() + off + 4);
        const std::size_t body = off + 8;
        if (body + size > bytes.size()) throw IngestError("truncated chunk in '" + path + "'");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) throw IngestError("short fmt chunk in '" + path + "'");
            const std::uint16_t format = get_u16(bytes.data() + body);
            channels = get_u16(bytes.data() + body + 2);
            sample_rate = static_cast<int>(get_u32(bytes.data() + body + 4));
            bits = get_u16(bytes.data() + body + 14);
            if (format != 1) throw IngestError("'" + path + "': only PCM supported");
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw IngestError("'" + path + "': data before fmt");
            if (channels != 1 || bits != 16)
                throw IngestError("'" + path + "': expected mono 16-bit PCM");
            const std::size_t n = size / 2;
            samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::int16_t q =
                    static_cast<std::int16_t>(get_u16(bytes.data() + body + 2 * i));
                samples[i] = static_cast<double>(q) / 32767.0;
            }
            have_data = true;
        }
        off = body + size + (size & 1);
    }
    if (!have_data) throw IngestError("'" + path + "': no data chunk");
    Waveform w;
    w.samples = std::move(samples);
    w.sample_rate_hz = sample_rate;
    return w;
}

}  // namespace contsep::dsp
