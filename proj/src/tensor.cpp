#include "fasu/tensor.hpp"

#include "fasu/kernels.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace fasu {

namespace {

std::size_t checked_size(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 4)
        throw std::invalid_argument("tensor rank must be 1..4");
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extent must be positive");
        if (e > std::numeric_limits<std::size_t>::max() / n)
            throw std::invalid_argument("tensor size overflow");
        n *= e;
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

Tensor Tensor::random_normal(std::vector<std::size_t> shape, std::uint64_t seed, double stddev) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data_) v = dist(rng);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("tensor shape mismatch");
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b);
    Tensor out(a.shape());
    kernels::active().add(a.size(), a.data(), b.data(), out.data());
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b);
    Tensor out(a.shape());
    kernels::active().sub(a.size(), a.data(), b.data(), out.data());
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    kernels::active().scale(a.size(), s, a.data(), out.data());
    return out;
}

void add_inplace(Tensor& a, const Tensor& b, double factor) {
    require_same_shape(a, b);
    kernels::active().madd(a.size(), factor, b.data(), a.data());
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b);
    return kernels::active().dot(a.size(), a.data(), b.data());
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

GradField grad_forward(const Tensor& image) {
    if (image.rank() != 2) throw std::invalid_argument("grad_forward expects a rank-2 tensor");
    const std::size_t H = image.extent(0), W = image.extent(1);
    GradField g{Tensor::zeros({H, W}), Tensor::zeros({H, W})};
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j + 1 < W; ++j)
            g.gx.at(i, j) = image.at(i, j + 1) - image.at(i, j);
        if (i + 1 < H)
            kernels::active().sub(W, image.data() + (i + 1) * W, image.data() + i * W,
                                  g.gy.data() + i * W);
    }
    return g;
}

Tensor div_backward(const GradField& g) {
    if (g.gx.rank() != 2 || !g.gx.same_shape(g.gy))
        throw std::invalid_argument("div_backward: gx/gy shape mismatch");
    const std::size_t H = g.gx.extent(0), W = g.gx.extent(1);
    Tensor out({H, W});
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            double v = 0.0;
            if (j + 1 < W) v += g.gx.at(i, j);
            if (j > 0) v -= g.gx.at(i, j - 1);
            if (i + 1 < H) v += g.gy.at(i, j);
            if (i > 0) v -= g.gy.at(i - 1, j);
            out.at(i, j) = v;
        }
    }
    return out;
}

} // namespace fasu
