#ifndef FASU_FAS_HPP
#define FASU_FAS_HPP

#include "fasu/model.hpp"
#include "fasu/tensor.hpp"

#include <vector>

namespace fasu {

struct FasConfig {
    std::size_t levels = 3;
    std::size_t k_pre = 3;    // pre-smoothing steps per level
    std::size_t k_coarse = 7; // smoothing steps on the coarsest level
    std::size_t k_post = 4;   // post-smoothing steps per level
    std::size_t cycles = 10;
    double tau = 0.0; // <= 0 selects the automatic step size
    std::size_t min_coarse_extent = 4;

    void validate() const;
};

/// Per-level extents, halved with ceiling division; level 0 is the fine grid.
struct GridHierarchy {
    std::vector<std::pair<std::size_t, std::size_t>> extents;
    ModelParams params; // shared across levels

    GridHierarchy(std::size_t H, std::size_t W, const ModelParams& p, const FasConfig& cfg);
};

/// Automatic smoothing step size 1 / (|A|_1^2 + mu (8 nu + 4/eps)),
/// a row-sum bound on the linearized operator. The 4/eps term is only
/// present when the length penalty is active.
double auto_tau(const ModelParams& p);

/// Damped residual feedback: u <- u + tau (b - F(u)), `steps` times.
/// Throws on a non-finite iterate, reporting the step index.
Tensor smooth(Tensor u, const Tensor& b, const ModelParams& p, std::size_t steps, double tau);

// Full-weighting restriction / bilinear prolongation, even-pixel anchored,
// ceiling-halved coarse extents. Applied per channel for rank-3 input.
Tensor restrict_grid(const Tensor& x);
Tensor prolong_grid(const Tensor& x, std::size_t H, std::size_t W);

/// One recursive cycle starting at `level` (1-based; hierarchy.extents[level-1]).
Tensor fas_vcycle(Tensor u, const Tensor& b, std::size_t level, const GridHierarchy& hier,
                  const FasConfig& cfg);

struct SolveResult {
    Tensor u;                           // d x H x W feature field
    std::vector<double> residual_trace; // |b - F(u)|_2 after each cycle (index 0 = initial)
    std::vector<double> energy_trace;   // model energy after each cycle
};

/// Classical two-grid-and-beyond solve of F(u) = A^T f starting from u0 = A^T f.
SolveResult solve(const Tensor& f, const ModelParams& p, const FasConfig& cfg);

} // namespace fasu

#endif
