#include <doctest.h>

#include "fasu/fas.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace fasu;

namespace {

ModelParams linear_params() {
    ModelParams p;
    p.tv_enabled = false;
    p.nu = 1.0;
    p.mu = 0.1;
    return p;
}

// Dense matrix of the linear operator F, one column per unit vector.
std::vector<double> dense_F(std::size_t H, std::size_t W, const ModelParams& p) {
    const std::size_t n = H * W;
    std::vector<double> m(n * n);
    for (std::size_t k = 0; k < n; ++k) {
        Tensor e = Tensor::zeros({1, H, W});
        e[k] = 1.0;
        Tensor col = apply_F(e, p);
        for (std::size_t i = 0; i < n; ++i) m[i * n + k] = col[i];
    }
    return m;
}

// Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<double> m, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m[c * n + j], m[piv * n + j]);
            std::swap(rhs[c], rhs[piv]);
        }
        const double d = m[c * n + c];
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = m[r * n + c] / d;
            if (f == 0.0) continue;
            for (std::size_t j = c; j < n; ++j) m[r * n + j] -= f * m[c * n + j];
            rhs[r] -= f * rhs[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = rhs[ri];
        for (std::size_t j = ri + 1; j < n; ++j) acc -= m[ri * n + j] * x[j];
        x[ri] = acc / m[ri * n + ri];
    }
    return x;
}

} // namespace

TEST_SUITE_BEGIN("fas");

TEST_CASE("smooth basics") {
    ModelParams p;
    Tensor b = Tensor::random_normal({1, 8, 8}, 1);
    Tensor u = Tensor::random_normal({1, 8, 8}, 2);

    Tensor s0 = smooth(u, b, p, 0, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(s0[i] == u[i]);

    // zero-residual fixed point
    Tensor ustar = Tensor::random_normal({1, 8, 8}, 3);
    Tensor bstar = apply_F(ustar, p);
    Tensor sf = smooth(ustar, bstar, p, 5, 0.0);
    CHECK(norm_inf(sub(sf, ustar)) <= 1e-12);

    // monotone residual decrease, linear mode, auto tau
    ModelParams pl = linear_params();
    Tensor bl = Tensor::random_normal({1, 14, 14}, 4);
    Tensor ul = Tensor::zeros({1, 14, 14});
    double prev = norm2(residual(ul, bl, pl));
    for (int k = 0; k < 10; ++k) {
        ul = smooth(std::move(ul), bl, pl, 1, 0.0);
        double cur = norm2(residual(ul, bl, pl));
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("auto_tau value") {
    ModelParams p;
    p.mu = 2.0;
    p.nu = 0.5;
    p.eps_tv = 0.01;
    CHECK(auto_tau(p) == doctest::Approx(1.0 / (1.0 + 2.0 * (4.0 + 400.0))).epsilon(1e-14));
    p.tv_enabled = false;
    CHECK(auto_tau(p) == doctest::Approx(1.0 / (1.0 + 2.0 * 4.0)).epsilon(1e-14));
}

TEST_CASE("restriction stencil") {
    Tensor c = Tensor::full({6, 6}, 3.25);
    Tensor rc = restrict_grid(c);
    CHECK(rc.extent(0) == 3);
    CHECK(rc.extent(1) == 3);
    for (std::size_t i = 0; i < rc.size(); ++i)
        CHECK(rc[i] == doctest::Approx(3.25).epsilon(1e-14));

    // 4x4 with a single 1: hand stencil application (replicate boundary)
    Tensor x = Tensor::zeros({4, 4});
    x.at(2, 2) = 1.0;
    Tensor r = restrict_grid(x);
    CHECK(r.extent(0) == 2);
    CHECK(r.extent(1) == 2);
    // coarse centers sit at fine (0,0), (0,2), (2,0), (2,2); only the last
    // window touches (2,2), with the center weight 4/16
    CHECK(r.at(0, 0) == 0.0);
    CHECK(r.at(0, 1) == 0.0);
    CHECK(r.at(1, 0) == 0.0);
    CHECK(r.at(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("prolongation") {
    Tensor c = Tensor::full({3, 3}, -1.5);
    Tensor f = prolong_grid(c, 6, 6);
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(f[i] == doctest::Approx(-1.5).epsilon(1e-14));

    // affine reproduction at interior pixels
    Tensor ramp({4, 4});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) ramp.at(i, j) = 2.0 * i + 0.5 * j;
    Tensor fr = prolong_grid(ramp, 7, 7);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j)
            CHECK(fr.at(i, j) == doctest::Approx(1.0 * i + 0.25 * j).epsilon(1e-12));

    // single coarse 1 -> tent
    Tensor s = Tensor::zeros({3, 3});
    s.at(1, 1) = 1.0;
    Tensor ft = prolong_grid(s, 6, 6);
    const double tent[3] = {0.5, 1.0, 0.5};
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            double expect = 0.0;
            if (i >= 1 && i <= 3 && j >= 1 && j <= 3) expect = tent[i - 1] * tent[j - 1];
            CHECK(ft.at(i, j) == doctest::Approx(expect).epsilon(1e-14));
        }
}

TEST_CASE("restrict/prolong quarter adjointness") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 100; ++t) {
        std::size_t H = 7 + 2 * (rng() % 6), W = 7 + 2 * (rng() % 6);
        std::size_t h = (H + 1) / 2, w = (W + 1) / 2;
        Tensor x = Tensor::random_normal({H, W}, rng());
        // interior-supported coarse field: zero the coarse border
        Tensor y = Tensor::random_normal({h, w}, rng());
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                if (i == 0 || j == 0 || i == h - 1 || j == w - 1) y.at(i, j) = 0.0;
        double lhs = dot(restrict_grid(x), y);
        double rhs = 0.25 * dot(x, prolong_grid(y, H, W));
        CHECK(std::abs(lhs - rhs) <= 1e-10);
    }
}

TEST_CASE("FAS exactness invariant") {
    ModelParams p;
    p.mu = 0.8;
    p.nu = 0.5;
    FasConfig cfg;
    cfg.levels = 3;
    GridHierarchy hier(17, 17, p, cfg);

    Tensor ustar = Tensor::random_normal({1, 17, 17}, 7, 0.3);
    Tensor b = apply_F(ustar, p);
    Tensor out = fas_vcycle(ustar, b, 1, hier, cfg);
    CHECK(norm_inf(sub(out, ustar)) <= 1e-10);
}

TEST_CASE("single level degenerates to coarse smoothing") {
    ModelParams p;
    FasConfig cfg;
    cfg.levels = 1;
    cfg.k_coarse = 6;
    GridHierarchy hier(9, 9, p, cfg);
    Tensor b = Tensor::random_normal({1, 9, 9}, 12);
    Tensor u0 = Tensor::zeros({1, 9, 9});
    Tensor v = fas_vcycle(u0, b, 1, hier, cfg);
    Tensor s = smooth(u0, b, p, 6, cfg.tau);
    CHECK(norm_inf(sub(v, s)) == 0.0);
}

TEST_CASE("linear-mode oracle equivalence and contraction") {
    ModelParams p = linear_params();
    FasConfig cfg;
    cfg.levels = 3;
    cfg.k_pre = 3;
    cfg.k_coarse = 7;
    cfg.k_post = 4;
    GridHierarchy hier(17, 17, p, cfg);

    auto M = dense_F(17, 17, p);

    std::mt19937_64 rng(404);
    std::vector<double> factors;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor b = Tensor::random_normal({1, 17, 17}, rng());
        std::vector<double> rhs(b.data(), b.data() + b.size());
        auto xs = dense_solve(M, rhs);
        Tensor ustar({1, 17, 17});
        std::copy(xs.begin(), xs.end(), ustar.data());

        Tensor u = Tensor::zeros({1, 17, 17});
        double prev = norm2(residual(u, b, p));
        for (int c = 0; c < 15; ++c) {
            u = fas_vcycle(std::move(u), b, 1, hier, cfg);
            double cur = norm2(residual(u, b, p));
            if (prev > 1e-13) factors.push_back(cur / prev);
            prev = cur;
        }
        CHECK(norm_inf(sub(u, ustar)) <= 1e-6);
    }
    std::sort(factors.begin(), factors.end());
    double median = factors[factors.size() / 2];
    CHECK(median <= 0.5);
}

TEST_CASE("contraction on smooth right-hand sides, 33x33 L=4") {
    ModelParams p = linear_params();
    FasConfig cfg;
    cfg.levels = 4;
    GridHierarchy hier(33, 33, p, cfg);

    std::mt19937_64 rng(606);
    std::vector<double> per_cycle;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor coarse = Tensor::random_normal({17, 17}, rng());
        Tensor plane = prolong_grid(coarse, 33, 33);
        Tensor b({1, 33, 33});
        std::copy(plane.data(), plane.data() + plane.size(), b.data());

        Tensor u = Tensor::zeros({1, 33, 33});
        double prev = norm2(residual(u, b, p));
        for (int c = 0; c < 8; ++c) {
            u = fas_vcycle(std::move(u), b, 1, hier, cfg);
            double cur = norm2(residual(u, b, p));
            if (prev > 1e-12) {
                CHECK(cur / prev < 1.0);
                per_cycle.push_back(cur / prev);
            }
            prev = cur;
        }
    }
    std::sort(per_cycle.begin(), per_cycle.end());
    CHECK(per_cycle[per_cycle.size() / 2] <= 0.5);
}

TEST_CASE("solve basics") {
    ModelParams p;
    FasConfig cfg;
    cfg.levels = 2;
    cfg.cycles = 2;

    SolveResult rz = solve(Tensor::zeros({12, 12}), p, cfg);
    CHECK(norm_inf(rz.u) == 0.0);

    // mu = 0, identity A: the system is u = f
    ModelParams p0;
    p0.mu = 0.0;
    FasConfig c0;
    c0.levels = 1;
    c0.k_coarse = 1;
    c0.cycles = 1;
    c0.tau = 1.0;
    Tensor f = Tensor::random_normal({8, 8}, 5);
    SolveResult r0 = solve(f, p0, c0);
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(r0.u[i] == doctest::Approx(f[i]).epsilon(1e-12));

    CHECK(rz.residual_trace.size() == 3);
    CHECK(rz.energy_trace.size() == 3);
}

TEST_CASE("energy trace non-increasing on noisy phantom") {
    ModelParams p;
    p.mu = 5.0;
    p.nu = 0.1;
    p.eps_tv = 0.05;
    FasConfig cfg;
    cfg.levels = 3;
    cfg.cycles = 6;

    Tensor f({32, 32});
    std::mt19937_64 rng(88);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j) {
            double di = double(i) - 16.0, dj = double(j) - 16.0;
            f.at(i, j) = (di * di + dj * dj < 81.0 ? 0.8 : 0.2) + noise(rng);
        }
    SolveResult r = solve(f, p, cfg);
    for (std::size_t k = 1; k < r.energy_trace.size(); ++k)
        CHECK(r.energy_trace[k] <= r.energy_trace[k - 1] + 1e-9);
}

TEST_SUITE_END();
