#ifndef FASU_KERNELS_HPP
#define FASU_KERNELS_HPP

#include <cstddef>

// Hot inner loops shared by the stencil, solver and network code.
// Scalar reference implementations always exist; an AVX2/FMA variant is
// selected once at startup when the CPU supports it. Both variants are
// equivalence-tested against each other.

namespace fasu::kernels {

struct Ops {
    // y[i] += a * x[i]
    void (*madd)(std::size_t n, double a, const double* x, double* y);
    // y[i] = x[i] + z[i]
    void (*add)(std::size_t n, const double* x, const double* z, double* y);
    // y[i] = x[i] - z[i]
    void (*sub)(std::size_t n, const double* x, const double* z, double* y);
    // y[i] = a * x[i]
    void (*scale)(std::size_t n, double a, const double* x, double* y);
    // sum x[i] * z[i]
    double (*dot)(std::size_t n, const double* x, const double* z);
    // y[i] = max(x[i], 0)
    void (*relu)(std::size_t n, const double* x, double* y);

    const char* name;
};

namespace scalar { extern const Ops ops; }
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 { extern const Ops ops; }
#endif

// Runtime-dispatched table (scalar fallback on unsupported CPUs).
const Ops& active();

// Force a specific backend, used by the equivalence tests. Returns false
// if the backend is not available on this CPU.
bool select(const char* name);

} // namespace fasu::kernels

#endif
