#include "fasu/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fasu {

namespace {

void require_same_extents(const SegMask& a, const SegMask& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("mask extents mismatch");
}

std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const SegMask& m, int class_id) {
    std::vector<std::pair<std::size_t, std::size_t>> pts;
    const long H = static_cast<long>(m.height), W = static_cast<long>(m.width);
    for (long i = 0; i < H; ++i)
        for (long j = 0; j < W; ++j) {
            if (m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) != class_id)
                continue;
            const long nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            bool exposed = false;
            for (const auto& p : nb) {
                if (p[0] < 0 || p[0] >= H || p[1] < 0 || p[1] >= W ||
                    m.at(static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1])) !=
                        class_id) {
                    exposed = true;
                    break;
                }
            }
            if (exposed) pts.emplace_back(i, j);
        }
    return pts;
}

double min_dist(const std::pair<std::size_t, std::size_t>& v,
                const std::vector<std::pair<std::size_t, std::size_t>>& set) {
    double best = std::numeric_limits<double>::max();
    for (const auto& x : set) {
        const double di = static_cast<double>(v.first) - static_cast<double>(x.first);
        const double dj = static_cast<double>(v.second) - static_cast<double>(x.second);
        best = std::min(best, di * di + dj * dj);
    }
    return std::sqrt(best);
}

} // namespace

double dsc(const SegMask& pred, const SegMask& gt, int class_id) {
    require_same_extents(pred, gt);
    std::size_t s = 0, y = 0, inter = 0;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const bool ps = pred.labels[i] == class_id, ys = gt.labels[i] == class_id;
        s += ps;
        y += ys;
        inter += ps && ys;
    }
    if (s + y == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(s + y);
}

double precision(const SegMask& pred, const SegMask& gt, int class_id) {
    require_same_extents(pred, gt);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const bool ps = pred.labels[i] == class_id, ys = gt.labels[i] == class_id;
        tp += ps && ys;
        fp += ps && !ys;
        fn += !ps && ys;
    }
    if (tp + fp == 0) return fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double ssd(const SegMask& pred, const SegMask& gt, int class_id, double spacing) {
    require_same_extents(pred, gt);
    const auto bp = boundary_pixels(pred, class_id);
    const auto bg = boundary_pixels(gt, class_id);
    if (bp.empty() || bg.empty())
        throw std::runtime_error("ssd: empty boundary for class " + std::to_string(class_id));
    double sum = 0.0;
    for (const auto& v : bp) sum += min_dist(v, bg);
    for (const auto& v : bg) sum += min_dist(v, bp);
    return spacing * sum / static_cast<double>(bp.size() + bg.size());
}

MetricsReport evaluate(const SegMask& pred, const SegMask& gt, std::size_t num_classes,
                       double spacing) {
    require_same_extents(pred, gt);
    MetricsReport rep;
    rep.spacing = spacing;
    double ssd_sum = 0.0;
    std::size_t ssd_n = 0;
    for (std::size_t c = 1; c < num_classes; ++c) {
        const int cid = static_cast<int>(c);
        rep.dsc.push_back(dsc(pred, gt, cid));
        rep.precision.push_back(precision(pred, gt, cid));
        try {
            const double v = ssd(pred, gt, cid, spacing);
            rep.ssd.emplace_back(v);
            ssd_sum += v;
            ++ssd_n;
        } catch (const std::runtime_error&) {
            rep.ssd.emplace_back(std::nullopt);
        }
    }
    const std::size_t n = rep.dsc.size();
    if (n > 0) {
        for (double v : rep.dsc) rep.a_dsc += v;
        for (double v : rep.precision) rep.a_precision += v;
        rep.a_dsc /= static_cast<double>(n);
        rep.a_precision /= static_cast<double>(n);
    }
    rep.a_ssd = ssd_n > 0 ? ssd_sum / static_cast<double>(ssd_n) : 0.0;
    return rep;
}

} // namespace fasu
