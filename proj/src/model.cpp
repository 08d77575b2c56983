#include "fasu/model.hpp"

#include "fasu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fasu {

BlurSpec BlurSpec::identity(std::size_t d) {
    BlurSpec s;
    s.kind = Kind::identity;
    s.channel_mix.assign(d, 1.0 / static_cast<double>(d));
    return s;
}

BlurSpec BlurSpec::gaussian(double sigma, int radius, std::size_t d) {
    BlurSpec s;
    s.kind = Kind::gaussian;
    s.sigma = sigma;
    s.radius = radius;
    s.channel_mix.assign(d, 1.0 / static_cast<double>(d));
    return s;
}

std::vector<double> BlurSpec::kernel() const {
    if (kind == Kind::identity) return {1.0};
    const int n = 2 * radius + 1;
    std::vector<double> k(static_cast<std::size_t>(n) * n);
    double sum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>((dy + radius) * n + dx + radius)] = v;
            sum += v;
        }
    for (double& v : k) v /= sum;
    return k;
}

void BlurSpec::validate(std::size_t d) const {
    if (channel_mix.size() != d)
        throw std::invalid_argument("channel_mix length must equal channel count");
    double sum = 0.0;
    for (double m : channel_mix) {
        if (m < 0.0) throw std::invalid_argument("channel_mix entries must be nonnegative");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("channel_mix must sum to 1");
    if (kind == Kind::gaussian && (sigma <= 0.0 || radius < 1))
        throw std::invalid_argument("gaussian blur needs sigma > 0 and radius >= 1");
}

void ModelParams::validate() const {
    if (mu < 0.0 || nu < 0.0) throw std::invalid_argument("mu and nu must be nonnegative");
    if (eps_tv <= 0.0) throw std::invalid_argument("eps_tv must be positive");
    if (channels < 1) throw std::invalid_argument("channels must be >= 1");
    blur.validate(channels);
}

namespace {

std::size_t clampi(long v, long hi) {
    if (v < 0) return 0;
    if (v > hi) return static_cast<std::size_t>(hi);
    return static_cast<std::size_t>(v);
}

void require_feature(const Tensor& u, const ModelParams& p) {
    if (u.rank() != 3 || u.extent(0) != p.channels)
        throw std::invalid_argument("feature tensor must be d x H x W");
}

} // namespace

Tensor apply_A(const Tensor& u, const ModelParams& p) {
    require_feature(u, p);
    const std::size_t H = u.extent(1), W = u.extent(2);
    Tensor mixed({H, W});
    for (std::size_t c = 0; c < p.channels; ++c)
        kernels::active().madd(H * W, p.blur.channel_mix[c], u.data() + c * H * W, mixed.data());
    if (p.blur.kind == BlurSpec::Kind::identity) return mixed;

    const auto k = p.blur.kernel();
    const int r = p.blur.radius, n = 2 * r + 1;
    Tensor out({H, W});
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    acc += k[static_cast<std::size_t>((dy + r) * n + dx + r)] *
                           mixed.at(clampi(static_cast<long>(i) + dy, static_cast<long>(H) - 1),
                                    clampi(static_cast<long>(j) + dx, static_cast<long>(W) - 1));
            out.at(i, j) = acc;
        }
    return out;
}

Tensor apply_At(const Tensor& r_in, const ModelParams& p) {
    if (r_in.rank() != 2) throw std::invalid_argument("apply_At expects an H x W tensor");
    const std::size_t H = r_in.extent(0), W = r_in.extent(1);

    // Adjoint of the blur: scatter through the same clamped indexing.
    Tensor blurred({H, W});
    if (p.blur.kind == BlurSpec::Kind::identity) {
        blurred = r_in;
    } else {
        const auto k = p.blur.kernel();
        const int r = p.blur.radius, n = 2 * r + 1;
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                const double v = r_in.at(i, j);
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        blurred.at(clampi(static_cast<long>(i) + dy, static_cast<long>(H) - 1),
                                   clampi(static_cast<long>(j) + dx, static_cast<long>(W) - 1)) +=
                            k[static_cast<std::size_t>((dy + r) * n + dx + r)] * v;
            }
    }

    Tensor out({p.channels, H, W});
    for (std::size_t c = 0; c < p.channels; ++c)
        kernels::active().scale(H * W, p.blur.channel_mix[c], blurred.data(),
                                out.data() + c * H * W);
    return out;
}

GradField phi_prime(const GradField& g, const ModelParams& p) {
    if (!g.gx.same_shape(g.gy)) throw std::invalid_argument("phi_prime: gx/gy shape mismatch");
    GradField out{scale(g.gx, 2.0 * p.nu), scale(g.gy, 2.0 * p.nu)};
    if (!p.tv_enabled) return out;
    const std::size_t n = g.gx.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double m = 1.0 / std::sqrt(g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i] +
                                         p.eps_tv * p.eps_tv);
        out.gx[i] += g.gx[i] * m;
        out.gy[i] += g.gy[i] * m;
    }
    return out;
}

double eval_energy(const Tensor& u, const Tensor& f, const ModelParams& p) {
    require_feature(u, p);
    if (f.rank() != 2 || f.extent(0) != u.extent(1) || f.extent(1) != u.extent(2))
        throw std::invalid_argument("eval_energy: image shape mismatch");
    const Tensor au = apply_A(u, p);
    double e = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = f[i] - au[i];
        e += d * d;
    }
    const std::size_t H = u.extent(1), W = u.extent(2);
    for (std::size_t c = 0; c < p.channels; ++c) {
        Tensor ch({H, W});
        std::copy(u.data() + c * H * W, u.data() + (c + 1) * H * W, ch.data());
        const GradField g = grad_forward(ch);
        for (std::size_t i = 0; i < g.gx.size(); ++i) {
            const double g2 = g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i];
            double reg = p.nu * g2;
            if (p.tv_enabled) reg += std::sqrt(g2 + p.eps_tv * p.eps_tv) - p.eps_tv;
            e += p.mu * reg;
        }
    }
    return e;
}

Tensor apply_F(const Tensor& u, const ModelParams& p) {
    require_feature(u, p);
    const std::size_t H = u.extent(1), W = u.extent(2);
    Tensor out = apply_At(apply_A(u, p), p);
    for (std::size_t c = 0; c < p.channels; ++c) {
        Tensor ch({H, W});
        std::copy(u.data() + c * H * W, u.data() + (c + 1) * H * W, ch.data());
        const Tensor d = div_backward(phi_prime(grad_forward(ch), p));
        kernels::active().madd(H * W, -p.mu, d.data(), out.data() + c * H * W);
    }
    return out;
}

Tensor residual(const Tensor& u, const Tensor& b, const ModelParams& p) {
    return sub(b, apply_F(u, p));
}

} // namespace fasu
