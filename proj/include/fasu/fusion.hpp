#ifndef FASU_FUSION_HPP
#define FASU_FUSION_HPP

#include "fasu/tensor.hpp"

#include <cstdint>
#include <vector>

namespace fasu {

/// Integer label map with the spatial extents of its source image.
struct SegMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels; // row-major, values in [0, c)

    SegMask() = default;
    SegMask(std::size_t h, std::size_t w) : height(h), width(w), labels(h * w, 0) {}

    int& at(std::size_t i, std::size_t j) { return labels[i * width + j]; }
    int at(std::size_t i, std::size_t j) const { return labels[i * width + j]; }
    bool operator==(const SegMask& o) const = default;
};

/// Label = number of thresholds strictly below the pixel value.
SegMask threshold_segment(const Tensor& u, const std::vector<double>& thresholds);

/// Lloyd iterations over per-pixel d-vectors with k-means++ seeding.
/// Labelsize renumbered by ascending centroid first coordinate.
SegMask kmeans_segment(const Tensor& u, std::size_t k, std::uint64_t seed,
                       std::size_t max_iter = 100);

struct ComponentResult {
    SegMask mask;
    bool class_absent = false;
};

/// Keeps only the largest 4-connected component of class_id, relabeling the
/// rest to background 0. Ties go to the component containing the smallest
/// row-major pixel index.
ComponentResult largest_component(const SegMask& mask, int class_id);

/// Background regions not 4-connected to the image border become class_id.
SegMask fill_holes(const SegMask& mask, int class_id);

Tensor one_hot(const SegMask& mask, std::size_t c); // c x H x W
SegMask argmax_channels(const Tensor& probs);       // ties -> lowest class

} // namespace fasu

#endif
