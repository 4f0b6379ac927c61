#include <cstdlib>
#include <string>
#include <vector>

#include "contsep/error.hpp"
#include "contsep/kernels.hpp"

namespace contsep::kernels {

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
const KernelTable& avx512_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Avx512: return "avx512";
        case Backend::Neon: return "neon";
    }
    return "unknown";
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out{Backend::Scalar};
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) out.push_back(Backend::Avx2);
    if (__builtin_cpu_supports("avx512f")) out.push_back(Backend::Avx512);
#endif
#if defined(__aarch64__)
    out.push_back(Backend::Neon);
#endif
    return out;
}

const KernelTable& table_for(Backend b) {
    for (const Backend avail : available_backends()) {
        if (avail != b) continue;
        switch (b) {
            case Backend::Scalar: return scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
            case Backend::Avx2: return avx2_table();
            case Backend::Avx512: return avx512_table();
#endif
#if defined(__aarch64__)
            case Backend::Neon: return neon_table();
#endif
            default: break;
        }
    }
    throw ConfigError("kernel backend '" + backend_name(b) + "' is not available on this machine");
}

namespace {

Backend choose_backend() {
    const char* env = std::getenv("CONTSEP_KERNELS");
    const std::string wanted = env ? env : "auto";
    if (wanted == "scalar") return Backend::Scalar;
    if (wanted == "avx2") return Backend::Avx2;
    if (wanted == "avx512") return Backend::Avx512;
    if (wanted == "neon") return Backend::Neon;
    if (wanted != "auto" && !wanted.empty()) {
        throw ConfigError("unknown CONTSEP_KERNELS value '" + wanted +
                          "' (expected scalar|avx2|avx512|neon|auto)");
    }
    return available_backends().back();
}

}  // namespace

Backend active_backend() {
    static const Backend chosen = choose_backend();
    return chosen;
}

const KernelTable& active() {
    static const KernelTable& table = table_for(active_backend());
    return table;
}

}  // namespace contsep::kernels
