#include "fasu/fas.hpp"

#include "fasu/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fasu {

void FasConfig::validate() const {
    if (levels < 1) throw std::invalid_argument("levels must be >= 1");
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    if (levels > 1 && k_coarse < 1)
        throw std::invalid_argument("k_coarse must be >= 1 for a multi-level hierarchy");
    if (min_coarse_extent < 1) throw std::invalid_argument("min_coarse_extent must be >= 1");
}

GridHierarchy::GridHierarchy(std::size_t H, std::size_t W, const ModelParams& p,
                             const FasConfig& cfg)
    : params(p) {
    cfg.validate();
    p.validate();
    extents.emplace_back(H, W);
    for (std::size_t l = 1; l < cfg.levels; ++l) {
        H = (H + 1) / 2;
        W = (W + 1) / 2;
        extents.emplace_back(H, W);
    }
    if (extents.back().first < cfg.min_coarse_extent ||
        extents.back().second < cfg.min_coarse_extent)
        throw std::invalid_argument("coarsest grid smaller than min_coarse_extent");
}

double auto_tau(const ModelParams& p) {
    double a1 = 0.0;
    for (double v : p.blur.kernel()) a1 += std::abs(v);
    double mix = 0.0;
    for (double m : p.blur.channel_mix) mix += std::abs(m);
    a1 *= mix;
    double reg = 8.0 * p.nu;
    if (p.tv_enabled) reg += 4.0 / p.eps_tv;
    return 1.0 / (a1 * a1 + p.mu * reg);
}

Tensor smooth(Tensor u, const Tensor& b, const ModelParams& p, std::size_t steps, double tau) {
    if (tau <= 0.0) tau = auto_tau(p);
    for (std::size_t k = 0; k < steps; ++k) {
        add_inplace(u, residual(u, b, p), tau);
        if (!u.all_finite())
            throw std::runtime_error("smoother diverged at step " + std::to_string(k + 1));
    }
    return u;
}

namespace {

std::size_t clampi(long v, long hi) {
    if (v < 0) return 0;
    if (v > hi) return static_cast<std::size_t>(hi);
    return static_cast<std::size_t>(v);
}

// 1/16 [1 2 1; 2 4 2; 1 2 1] at even fine pixels, replicate boundary.
void restrict_plane(const double* x, std::size_t H, std::size_t W, double* out,
                    std::size_t h, std::size_t w) {
    static const double st[3] = {0.25, 0.5, 0.25};
    for (std::size_t ci = 0; ci < h; ++ci)
        for (std::size_t cj = 0; cj < w; ++cj) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::size_t fi = clampi(2 * static_cast<long>(ci) + dy,
                                                  static_cast<long>(H) - 1);
                    const std::size_t fj = clampi(2 * static_cast<long>(cj) + dx,
                                                  static_cast<long>(W) - 1);
                    acc += st[dy + 1] * st[dx + 1] * x[fi * W + fj];
                }
            out[ci * w + cj] = acc;
        }
}

// Bilinear, anchored so that fine pixel 2i coincides with coarse pixel i.
void prolong_plane(const double* x, std::size_t h, std::size_t w, double* out,
                   std::size_t H, std::size_t W) {
    for (std::size_t i = 0; i < H; ++i) {
        const std::size_t i0 = i / 2;
        const std::size_t i1 = clampi(static_cast<long>(i0) + 1, static_cast<long>(h) - 1);
        const double wi = (i % 2 == 0) ? 1.0 : 0.5;
        for (std::size_t j = 0; j < W; ++j) {
            const std::size_t j0 = j / 2;
            const std::size_t j1 = clampi(static_cast<long>(j0) + 1, static_cast<long>(w) - 1);
            const double wj = (j % 2 == 0) ? 1.0 : 0.5;
            out[i * W + j] = wi * wj * x[i0 * w + j0] + wi * (1.0 - wj) * x[i0 * w + j1] +
                             (1.0 - wi) * wj * x[i1 * w + j0] +
                             (1.0 - wi) * (1.0 - wj) * x[i1 * w + j1];
        }
    }
}

} // namespace

Tensor restrict_grid(const Tensor& x) {
    if (x.rank() == 2) {
        const std::size_t H = x.extent(0), W = x.extent(1);
        if (H < 2 || W < 2) throw std::invalid_argument("restrict_grid: extent < 2");
        Tensor out({(H + 1) / 2, (W + 1) / 2});
        restrict_plane(x.data(), H, W, out.data(), out.extent(0), out.extent(1));
        return out;
    }
    if (x.rank() == 3) {
        const std::size_t d = x.extent(0), H = x.extent(1), W = x.extent(2);
        if (H < 2 || W < 2) throw std::invalid_argument("restrict_grid: extent < 2");
        Tensor out({d, (H + 1) / 2, (W + 1) / 2});
        const std::size_t h = out.extent(1), w = out.extent(2);
        for (std::size_t c = 0; c < d; ++c)
            restrict_plane(x.data() + c * H * W, H, W, out.data() + c * h * w, h, w);
        return out;
    }
    throw std::invalid_argument("restrict_grid expects rank 2 or 3");
}

Tensor prolong_grid(const Tensor& x, std::size_t H, std::size_t W) {
    if (x.rank() == 2) {
        if (x.extent(0) != (H + 1) / 2 || x.extent(1) != (W + 1) / 2)
            throw std::invalid_argument("prolong_grid: inconsistent target extents");
        Tensor out({H, W});
        prolong_plane(x.data(), x.extent(0), x.extent(1), out.data(), H, W);
        return out;
    }
    if (x.rank() == 3) {
        const std::size_t d = x.extent(0), h = x.extent(1), w = x.extent(2);
        if (h != (H + 1) / 2 || w != (W + 1) / 2)
            throw std::invalid_argument("prolong_grid: inconsistent target extents");
        Tensor out({d, H, W});
        for (std::size_t c = 0; c < d; ++c)
            prolong_plane(x.data() + c * h * w, h, w, out.data() + c * H * W, H, W);
        return out;
    }
    throw std::invalid_argument("prolong_grid expects rank 2 or 3");
}

Tensor fas_vcycle(Tensor u, const Tensor& b, std::size_t level, const GridHierarchy& hier,
                  const FasConfig& cfg) {
    const ModelParams& p = hier.params;
    if (level < 1 || level > cfg.levels)
        throw std::invalid_argument("fas_vcycle: level out of range");
    if (level == cfg.levels) return smooth(std::move(u), b, p, cfg.k_coarse, cfg.tau);

    u = smooth(std::move(u), b, p, cfg.k_pre, cfg.tau);
    const Tensor r = residual(u, b, p);
    const Tensor u_coarse = restrict_grid(u);
    Tensor b_coarse = restrict_grid(r);
    add_inplace(b_coarse, apply_F(u_coarse, p));

    const Tensor u_solved = fas_vcycle(u_coarse, b_coarse, level + 1, hier, cfg);
    const Tensor correction =
        prolong_grid(sub(u_solved, u_coarse), u.extent(1), u.extent(2));
    add_inplace(u, correction);

    return smooth(std::move(u), b, p, cfg.k_post, cfg.tau);
}

SolveResult solve(const Tensor& f, const ModelParams& p, const FasConfig& cfg) {
    if (f.rank() != 2) throw std::invalid_argument("solve expects an H x W image");
    p.validate();
    GridHierarchy hier(f.extent(0), f.extent(1), p, cfg);

    const Tensor b = apply_At(f, p);
    SolveResult res;
    res.u = b;
    res.residual_trace.push_back(norm2(residual(res.u, b, p)));
    res.energy_trace.push_back(eval_energy(res.u, f, p));
    for (std::size_t c = 0; c < cfg.cycles; ++c) {
        res.u = fas_vcycle(std::move(res.u), b, 1, hier, cfg);
        res.residual_trace.push_back(norm2(residual(res.u, b, p)));
        res.energy_trace.push_back(eval_energy(res.u, f, p));
    }
    return res;
}

} // namespace fasu
