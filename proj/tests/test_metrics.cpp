#include <doctest.h>

#include "fasu/metrics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace fasu;

namespace {

double oracle_dsc(const SegMask& a, const SegMask& b, int cls) {
    std::size_t na = 0, nb = 0, ni = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        bool ia = a.labels[i] == cls, ib = b.labels[i] == cls;
        na += ia;
        nb += ib;
        ni += (ia && ib);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(ni) / double(na + nb);
}

double oracle_precision(const SegMask& pred, const SegMask& gt, int cls) {
    std::size_t tp = 0, fp = 0, npos = 0;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        bool ip = pred.labels[i] == cls, ig = gt.labels[i] == cls;
        npos += ig;
        if (ip && ig) ++tp;
        if (ip && !ig) ++fp;
    }
    if (tp + fp == 0) return npos == 0 ? 1.0 : 0.0;
    return double(tp) / double(tp + fp);
}

std::vector<std::pair<std::size_t, std::size_t>> oracle_boundary(const SegMask& m, int cls) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < m.height; ++i)
        for (std::size_t j = 0; j < m.width; ++j) {
            if (m.at(i, j) != cls) continue;
            bool exposed = i == 0 || i + 1 == m.height || j == 0 || j + 1 == m.width;
            if (!exposed) {
                exposed = m.at(i - 1, j) != cls || m.at(i + 1, j) != cls ||
                          m.at(i, j - 1) != cls || m.at(i, j + 1) != cls;
            }
            if (exposed) out.emplace_back(i, j);
        }
    return out;
}

double oracle_ssd(const SegMask& pred, const SegMask& gt, int cls, double spacing) {
    auto bp = oracle_boundary(pred, cls);
    auto bg = oracle_boundary(gt, cls);
    REQUIRE(!bp.empty());
    REQUIRE(!bg.empty());
    auto sum_min = [&](const auto& from, const auto& to) {
        double total = 0.0;
        for (auto [i, j] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (auto [y, x] : to) {
                double di = double(i) - double(y), dj = double(j) - double(x);
                best = std::min(best, std::sqrt(di * di + dj * dj));
            }
            total += best;
        }
        return total;
    };
    return spacing * (sum_min(bp, bg) + sum_min(bg, bp)) / double(bp.size() + bg.size());
}

} // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("dsc cases") {
    SegMask a(4, 4), b(4, 4);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) a.at(i, j) = b.at(i, j) = 1;
    CHECK(dsc(a, b, 1) == 1.0);
    CHECK(dsc(a, b, 2) == 1.0); // both empty

    // |S| = |Y| = 4, overlap 2
    SegMask s(2, 4), y(2, 4);
    for (std::size_t j = 0; j < 4; ++j) s.at(0, j) = 1;
    for (std::size_t j = 2; j < 4; ++j) y.at(0, j) = 1;
    y.at(1, 0) = 1;
    y.at(1, 1) = 1;
    CHECK(dsc(s, y, 1) == 0.5);
}

TEST_CASE("precision cases") {
    SegMask pred(3, 3), gt(3, 3);
    pred.at(1, 1) = 1;
    gt.at(1, 1) = 1;
    gt.at(1, 2) = 1;
    CHECK(precision(pred, gt, 1) == 1.0); // pred subset of gt

    SegMask p2(2, 2), g2(2, 2);
    p2.at(0, 0) = p2.at(0, 1) = p2.at(1, 0) = p2.at(1, 1) = 1;
    g2.at(0, 0) = g2.at(0, 1) = g2.at(1, 0) = 1;
    CHECK(precision(p2, g2, 1) == 0.75); // TP=3 FP=1

    SegMask e1(2, 2), e2(2, 2);
    CHECK(precision(e1, e2, 1) == 1.0);
    e2.at(0, 0) = 1;
    CHECK(precision(e1, e2, 1) == 0.0);
}

TEST_CASE("ssd cases") {
    SegMask a(5, 5), b(5, 5);
    for (std::size_t i = 1; i < 4; ++i)
        for (std::size_t j = 1; j < 4; ++j) a.at(i, j) = b.at(i, j) = 1;
    CHECK(ssd(a, b, 1) == 0.0);

    // two single-pixel objects 3 apart
    SegMask p(1, 8), g(1, 8);
    p.at(0, 1) = 1;
    g.at(0, 4) = 1;
    CHECK(ssd(p, g, 1) == 3.0);
    CHECK(ssd(p, g, 1, 2.0) == 6.0);

    // shifted square vs exhaustive oracle
    SegMask sq(7, 7), sh(7, 7);
    for (std::size_t i = 1; i < 6; ++i)
        for (std::size_t j = 1; j < 6; ++j) sq.at(i, j) = 1;
    for (std::size_t i = 1; i < 6; ++i)
        for (std::size_t j = 2; j < 7; ++j) sh.at(i, j) = 1;
    CHECK(ssd(sq, sh, 1) == doctest::Approx(oracle_ssd(sq, sh, 1, 1.0)).epsilon(1e-12));

    SegMask empty(3, 3);
    CHECK_THROWS(ssd(empty, sq, 1));
}

TEST_CASE("200 random pairs vs oracles") {
    std::mt19937_64 rng(4242);
    for (int t = 0; t < 200; ++t) {
        SegMask pred(16, 16), gt(16, 16);
        for (auto& v : pred.labels) v = int(rng() % 3);
        for (auto& v : gt.labels) v = int(rng() % 3);
        for (int cls = 1; cls < 3; ++cls) {
            CHECK(dsc(pred, gt, cls) == oracle_dsc(pred, gt, cls));
            CHECK(precision(pred, gt, cls) == oracle_precision(pred, gt, cls));
            CHECK(dsc(pred, gt, cls) == dsc(gt, pred, cls)); // symmetry
            auto bp = oracle_boundary(pred, cls);
            auto bg = oracle_boundary(gt, cls);
            if (!bp.empty() && !bg.empty()) {
                double s = ssd(pred, gt, cls);
                CHECK(std::abs(s - oracle_ssd(pred, gt, cls, 1.0)) <= 1e-12);
                CHECK(std::abs(s - ssd(gt, pred, cls)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("evaluate") {
    SegMask m(6, 6);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) m.at(i, j) = 1;
    for (std::size_t i = 3; i < 6; ++i)
        for (std::size_t j = 3; j < 6; ++j) m.at(i, j) = 2;
    MetricsReport r = evaluate(m, m, 3);
    CHECK(r.a_dsc == 1.0);
    CHECK(r.a_precision == 1.0);
    CHECK(r.a_ssd == 0.0);
    CHECK(r.dsc.size() == 2);

    // means equal hand averages on random masks
    std::mt19937_64 rng(77);
    SegMask pred(10, 10), gt(10, 10);
    for (auto& v : pred.labels) v = int(rng() % 3);
    for (auto& v : gt.labels) v = int(rng() % 3);
    MetricsReport rr = evaluate(pred, gt, 3);
    CHECK(rr.a_dsc ==
          doctest::Approx((oracle_dsc(pred, gt, 1) + oracle_dsc(pred, gt, 2)) / 2.0)
              .epsilon(1e-14));
    CHECK(rr.a_precision ==
          doctest::Approx((oracle_precision(pred, gt, 1) + oracle_precision(pred, gt, 2)) / 2.0)
              .epsilon(1e-14));

    // metrics invariant to relabeling of other classes
    SegMask pred2 = pred;
    for (auto& v : pred2.labels)
        if (v == 2) v = 0;
    CHECK(dsc(pred, gt, 1) == dsc(pred2, gt, 1));
}

TEST_SUITE_END();
