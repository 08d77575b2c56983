#include "fasu/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>

namespace fasu {

namespace {

void require_feature_rank3(const Tensor& u) {
    if (u.rank() != 3) throw std::invalid_argument("expected a d x H x W feature tensor");
}

} // namespace

SegMask threshold_segment(const Tensor& u, const std::vector<double>& thresholds) {
    require_feature_rank3(u);
    if (u.extent(0) != 1)
        throw std::invalid_argument("threshold_segment expects a single channel");
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (!(thresholds[i - 1] < thresholds[i]))
            throw std::invalid_argument("thresholds must be strictly ascending");

    const std::size_t H = u.extent(1), W = u.extent(2);
    SegMask mask(H, W);
    for (std::size_t i = 0; i < H * W; ++i) {
        int label = 0;
        for (double t : thresholds)
            if (u[i] > t) ++label;
        mask.labels[i] = label;
    }
    return mask;
}

SegMask kmeans_segment(const Tensor& u, std::size_t k, std::uint64_t seed,
                       std::size_t max_iter) {
    require_feature_rank3(u);
    if (k < 2) throw std::invalid_argument("kmeans_segment needs k >= 2");
    const std::size_t d = u.extent(0), H = u.extent(1), W = u.extent(2), n = H * W;

    auto pixel = [&](std::size_t i, std::size_t c) { return u[c * n + i]; };
    auto dist2 = [&](std::size_t i, const std::vector<double>& center) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = pixel(i, c) - center[c];
            s += diff * diff;
        }
        return s;
    };

    // Distinct-pixel precondition.
    {
        std::vector<std::vector<double>> seen;
        for (std::size_t i = 0; i < n && seen.size() < k; ++i) {
            std::vector<double> v(d);
            for (std::size_t c = 0; c < d; ++c) v[c] = pixel(i, c);
            if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
        }
        if (seen.size() < k)
            throw std::invalid_argument("kmeans_segment: k exceeds number of distinct pixels");
    }

    // k-means++ seeding.
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centers;
    {
        std::uniform_int_distribution<std::size_t> first(0, n - 1);
        std::size_t idx = first(rng);
        std::vector<double> c0(d);
        for (std::size_t c = 0; c < d; ++c) c0[c] = pixel(idx, c);
        centers.push_back(c0);
        std::vector<double> best(n);
        while (centers.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double m = std::numeric_limits<double>::max();
                for (const auto& c : centers) m = std::min(m, dist2(i, c));
                best[i] = m;
                total += m;
            }
            std::uniform_real_distribution<double> pick(0.0, total);
            double target = pick(rng), acc = 0.0;
            std::size_t chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += best[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
            std::vector<double> cn(d);
            for (std::size_t c = 0; c < d; ++c) cn[c] = pixel(chosen, c);
            centers.push_back(cn);
        }
    }

    std::vector<int> assign(n, -1);
    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int bi = 0;
            double bd = dist2(i, centers[0]);
            for (std::size_t ci = 1; ci < k; ++ci) {
                const double dd = dist2(i, centers[ci]);
                if (dd < bd) {
                    bd = dd;
                    bi = static_cast<int>(ci);
                }
            }
            if (assign[i] != bi) {
                assign[i] = bi;
                changed = true;
            }
        }
        if (!changed) break;
        for (std::size_t ci = 0; ci < k; ++ci) {
            std::vector<double> mean(d, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (assign[i] == static_cast<int>(ci)) {
                    for (std::size_t c = 0; c < d; ++c) mean[c] += pixel(i, c);
                    ++count;
                }
            if (count > 0)
                for (std::size_t c = 0; c < d; ++c) centers[ci][c] = mean[c] / count;
        }
    }

    // Renumber by ascending centroid first coordinate for determinism.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return centers[a][0] < centers[b][0]; });
    std::vector<int> relabel(k);
    for (std::size_t r = 0; r < k; ++r) relabel[order[r]] = static_cast<int>(r);

    SegMask mask(H, W);
    for (std::size_t i = 0; i < n; ++i) mask.labels[i] = relabel[assign[i]];
    return mask;
}

namespace {

// 4-connected flood fill over mask pixels matching `match`, marking comp ids.
void flood(const SegMask& mask, int match, std::size_t start, std::vector<int>& comp, int id) {
    const long H = static_cast<long>(mask.height), W = static_cast<long>(mask.width);
    std::queue<std::size_t> q;
    q.push(start);
    comp[start] = id;
    while (!q.empty()) {
        const std::size_t cur = q.front();
        q.pop();
        const long i = static_cast<long>(cur) / W, j = static_cast<long>(cur) % W;
        const long nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
        for (const auto& p : nb) {
            if (p[0] < 0 || p[0] >= H || p[1] < 0 || p[1] >= W) continue;
            const std::size_t ni = static_cast<std::size_t>(p[0] * W + p[1]);
            if (comp[ni] < 0 && mask.labels[ni] == match) {
                comp[ni] = id;
                q.push(ni);
            }
        }
    }
}

} // namespace

ComponentResult largest_component(const SegMask& mask, int class_id) {
    const std::size_t n = mask.labels.size();
    std::vector<int> comp(n, -1);
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < n; ++i)
        if (mask.labels[i] == class_id && comp[i] < 0) {
            flood(mask, class_id, i, comp, static_cast<int>(sizes.size()));
            sizes.push_back(0);
        }
    for (std::size_t i = 0; i < n; ++i)
        if (comp[i] >= 0) ++sizes[static_cast<std::size_t>(comp[i])];

    ComponentResult res{mask, sizes.empty()};
    if (sizes.empty()) return res;

    // Components are discovered in row-major order of their first pixel, so
    // the first maximal-size id is the tie winner.
    int keep = 0;
    for (std::size_t c = 1; c < sizes.size(); ++c)
        if (sizes[c] > sizes[static_cast<std::size_t>(keep)]) keep = static_cast<int>(c);
    for (std::size_t i = 0; i < n; ++i)
        if (comp[i] >= 0 && comp[i] != keep) res.mask.labels[i] = 0;
    return res;
}

SegMask fill_holes(const SegMask& mask, int class_id) {
    const std::size_t H = mask.height, W = mask.width, n = H * W;
    std::vector<int> reach(n, -1);
    int id = 0;
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            const bool border = i == 0 || j == 0 || i == H - 1 || j == W - 1;
            const std::size_t idx = i * W + j;
            if (border && mask.labels[idx] == 0 && reach[idx] < 0) flood(mask, 0, idx, reach, id++);
        }
    SegMask out = mask;
    for (std::size_t i = 0; i < n; ++i)
        if (mask.labels[i] == 0 && reach[i] < 0) out.labels[i] = class_id;
    return out;
}

Tensor one_hot(const SegMask& mask, std::size_t c) {
    const std::size_t H = mask.height, W = mask.width;
    Tensor out({c, H, W});
    for (std::size_t i = 0; i < H * W; ++i) {
        const int label = mask.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= c)
            throw std::invalid_argument("one_hot: label out of range");
        out[static_cast<std::size_t>(label) * H * W + i] = 1.0;
    }
    return out;
}

SegMask argmax_channels(const Tensor& probs) {
    require_feature_rank3(probs);
    const std::size_t c = probs.extent(0), H = probs.extent(1), W = probs.extent(2);
    SegMask mask(H, W);
    for (std::size_t i = 0; i < H * W; ++i) {
        int best = 0;
        double bv = probs[i];
        for (std::size_t ch = 1; ch < c; ++ch)
            if (probs[ch * H * W + i] > bv) {
                bv = probs[ch * H * W + i];
                best = static_cast<int>(ch);
            }
        mask.labels[i] = best;
    }
    return mask;
}

} // namespace fasu
