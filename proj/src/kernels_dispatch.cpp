#include "fasu/kernels.hpp"

#include <cstring>

namespace fasu::kernels {

namespace {

bool have_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    if (have_avx2()) return &avx2::ops;
#endif
    return &scalar::ops;
}

const Ops* g_active = pick_default();

} // namespace

const Ops& active() { return *g_active; }

bool select(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        g_active = &scalar::ops;
        return true;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (std::strcmp(name, "avx2") == 0 && have_avx2()) {
        g_active = &avx2::ops;
        return true;
    }
#endif
    return false;
}

} // namespace fasu::kernels
