// OpenBLAS runtime setup.
//
// Two quirks handled here:
//
// 1. Kernel dispatch. DYNAMIC_ARCH builds of OpenBLAS pick the compute kernel
//    from the CPUID model string. Under some hypervisors the model is masked
//    ("Intel(R) Xeon(R) Processor" with no family/model detail) and dispatch
//    falls back to the generic Prescott kernel, which is ~3-5x slower than
//    the AVX-512 path on the same hardware. OPENBLAS_CORETYPE overrides
//    dispatch, but the library reads it in its own constructor, which the
//    dynamic loader runs before any constructor of ours — by the time code
//    in this file executes, the kernel choice is already frozen. So instead
//    of just exporting the variable, we ask OpenBLAS which kernel it actually
//    picked; if it landed on the no-AVX fallback while the CPU reports AVX2
//    or AVX-512, we set the override and re-exec the process once so the
//    library initializes again with the hint in place. An OPENBLAS_CORETYPE
//    already present in the environment is always respected, and a kernel
//    that merely differs from our guess (e.g. Zen on AMD) is left alone —
//    only the known masked-CPUID fallbacks trigger the restart.
//
// 2. Threading. Estimates must be bit-reproducible run to run, and threaded
//    BLAS reductions are not. Default to one BLAS thread; callers can raise
//    it explicitly via set_blas_threads when reproducibility does not matter.

#include "mixent/blas_setup.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#if defined(__linux__)
#include <unistd.h>
#endif

extern "C" void openblas_set_num_threads(int);
extern "C" char* openblas_get_corename(void);

namespace mixent {

namespace {

// The kernels DYNAMIC_ARCH falls back to when CPUID gives it nothing to work
// with. Anything else means dispatch made a real decision and we keep out.
bool is_fallback_kernel(const char* name) {
    for (const char* bad : {"Prescott", "Northwood", "Katmai", "generic"}) {
        if (strcasecmp(name, bad) == 0) return true;
    }
    return false;
}

#if defined(__linux__)
// Restart the current process with the environment as it stands now. Returns
// only on failure. argv is rebuilt from /proc/self/cmdline (NUL-separated).
void reexec_self() {
    FILE* f = std::fopen("/proc/self/cmdline", "rb");
    if (f == nullptr) return;
    std::string raw;
    char buf[4096];
    size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) raw.append(buf, got);
    std::fclose(f);
    if (raw.empty()) return;

    std::vector<char*> argv;
    for (size_t pos = 0; pos < raw.size();) {
        argv.push_back(raw.data() + pos);
        pos = raw.find('\0', pos);
        if (pos == std::string::npos) break;
        ++pos;
    }
    argv.push_back(nullptr);
    execv("/proc/self/exe", argv.data());
}
#endif

__attribute__((constructor)) void pick_blas_kernel() {
    if (getenv("OPENBLAS_NUM_THREADS") == nullptr) {
        setenv("OPENBLAS_NUM_THREADS", "1", 0);
    }
#if defined(__x86_64__) && defined(__GNUC__)
    if (getenv("OPENBLAS_CORETYPE") != nullptr) return;  // user pinned a kernel
    __builtin_cpu_init();
    const char* want = nullptr;
    if (__builtin_cpu_supports("avx512f")) {
        want = "SKYLAKEX";
    } else if (__builtin_cpu_supports("avx2")) {
        want = "HASWELL";
    }
    if (want == nullptr || !is_fallback_kernel(openblas_get_corename())) return;
    setenv("OPENBLAS_CORETYPE", want, 1);
#if defined(__linux__)
    reexec_self();
#endif
    // exec failed (or not Linux): children at least inherit the hint.
    std::fprintf(stderr,
                 "warning: BLAS dispatch fell back to %s despite %s support; "
                 "restart with OPENBLAS_CORETYPE=%s for full speed\n",
                 openblas_get_corename(), want, want);
#endif
}

}  // namespace

void set_blas_threads(int n) {
    openblas_set_num_threads(n > 0 ? n : 1);
}

}  // namespace mixent
