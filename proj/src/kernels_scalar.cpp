#include "fasu/kernels.hpp"

#include <algorithm>

namespace fasu::kernels::scalar {

namespace {

void madd_(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_(std::size_t n, const double* x, const double* z, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + z[i];
}

void sub_(std::size_t n, const double* x, const double* z, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - z[i];
}

void scale_(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i];
}

double dot_(std::size_t n, const double* x, const double* z) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * z[i];
    return s;
}

void relu_(std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(x[i], 0.0);
}

} // namespace

const Ops ops = {madd_, add_, sub_, scale_, dot_, relu_, "scalar"};

} // namespace fasu::kernels::scalar
