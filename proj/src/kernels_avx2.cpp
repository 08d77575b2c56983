#if defined(__x86_64__) || defined(_M_X64)

#include "fasu/kernels.hpp"

#include <immintrin.h>

// Compiled with -mavx2 -mfma for this translation unit only; callers must
// go through kernels::active(), which checks CPU support before picking
// this table.

namespace fasu::kernels::avx2 {

namespace {

void madd_(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_(std::size_t n, const double* x, const double* z, double* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(z + i)));
    for (; i < n; ++i) y[i] = x[i] + z[i];
}

void sub_(std::size_t n, const double* x, const double* z, double* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(z + i)));
    for (; i < n; ++i) y[i] = x[i] - z[i];
}

void scale_(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a * x[i];
}

double dot_(std::size_t n, const double* x, const double* z) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(z + i), acc);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    for (; i < n; ++i) s += x[i] * z[i];
    return s;
}

void relu_(std::size_t n, const double* x, double* y) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

} // namespace

const Ops ops = {madd_, add_, sub_, scale_, dot_, relu_, "avx2"};

} // namespace fasu::kernels::avx2

#endif
