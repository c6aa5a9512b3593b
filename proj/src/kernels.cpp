// Runtime backend selection. The table is resolved once per process so a run
// never mixes backends; the chosen name is recorded in run manifests.

#include "lire/kernels.hpp"

#include <cstdlib>

#include "lire/error.hpp"

namespace lire::kern {

namespace {

const Ops* g_forced = nullptr;

const Ops* pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) return &avx2_ops;
#endif
#if defined(__aarch64__)
    return &neon_ops;
#endif
    return &scalar_ops;
}

const Ops* resolve() {
    if (g_forced) return g_forced;
    if (const char* env = std::getenv("LIRE_KERNELS")) {
        std::string name = env;
        if (!name.empty() && name != "auto") {
            force_backend(name);
            return g_forced;
        }
    }
    return pick_default();
}

const Ops*& cached() {
    static const Ops* ops = resolve();
    return ops;
}

} // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void force_backend(const std::string& name) {
    if (name == "scalar") {
        g_forced = &scalar_ops;
    } else if (name == "avx2") {
#if defined(__x86_64__) || defined(_M_X64)
        if (!cpu_has_avx2()) throw Error(Err::BadConfig, "avx2 kernels requested but CPU lacks AVX2/FMA");
        g_forced = &avx2_ops;
#else
        throw Error(Err::BadConfig, "avx2 kernels unavailable on this architecture");
#endif
    } else if (name == "neon") {
#if defined(__aarch64__)
        g_forced = &neon_ops;
#else
        throw Error(Err::BadConfig, "neon kernels unavailable on this architecture");
#endif
    } else if (name == "auto") {
        g_forced = nullptr;
    } else {
        throw Error(Err::BadConfig, "unknown kernel backend '" + name + "'");
    }
    cached() = g_forced ? g_forced : pick_default();
}

const Ops& active() { return *cached(); }

const char* backend_name() {
    switch (active().backend) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

} // namespace lire::kern
