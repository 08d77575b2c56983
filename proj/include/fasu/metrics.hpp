#ifndef FASU_METRICS_HPP
#define FASU_METRICS_HPP

#include "fasu/fusion.hpp"

#include <optional>
#include <vector>

namespace fasu {

struct MetricsReport {
    // Index 0 corresponds to class 1; background is excluded.
    std::vector<double> dsc;
    std::vector<double> precision;
    std::vector<std::optional<double>> ssd; // nullopt when either boundary is empty
    double a_dsc = 0.0;
    double a_precision = 0.0;
    double a_ssd = 0.0; // mean over classes with defined SSD
    double spacing = 1.0;
};

/// 2 |S n Y| / (|S| + |Y|); both sets empty -> 1.
double dsc(const SegMask& pred, const SegMask& gt, int class_id);

/// TP / (TP + FP); empty prediction -> 1 if gt empty, else 0.
double precision(const SegMask& pred, const SegMask& gt, int class_id);

/// Boundary pixels are class pixels with a 4-neighbor outside the class
/// (the image border counts as outside). Throws when either boundary is empty.
double ssd(const SegMask& pred, const SegMask& gt, int class_id, double spacing = 1.0);

MetricsReport evaluate(const SegMask& pred, const SegMask& gt, std::size_t num_classes,
                       double spacing = 1.0);

} // namespace fasu

#endif
