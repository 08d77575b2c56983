#ifndef FASU_MODEL_HPP
#define FASU_MODEL_HPP

#include "fasu/tensor.hpp"

#include <vector>

namespace fasu {

/// Blur operator A mapping d feature channels to one image channel:
/// channel mix followed by an optional normalized Gaussian convolution
/// with replicate padding.
struct BlurSpec {
    enum class Kind { identity, gaussian };
    Kind kind = Kind::identity;
    double sigma = 1.0;
    int radius = 2;
    std::vector<double> channel_mix = {1.0}; // length d, nonnegative, sums to 1

    static BlurSpec identity(std::size_t d = 1);
    static BlurSpec gaussian(double sigma, int radius, std::size_t d = 1);

    /// Normalized 2D kernel, (2r+1)^2 entries; {1} for identity.
    std::vector<double> kernel() const;
    void validate(std::size_t d) const;
};

struct ModelParams {
    double mu = 1.0;      // regularization weight
    double nu = 1.0;      // quadratic smoothness weight
    double eps_tv = 1e-3; // smoothing of the |grad| singularity
    BlurSpec blur;
    std::size_t channels = 1;
    bool tv_enabled = true;

    void validate() const;
};

// A and its exact adjoint: <A u, r> = <u, A^T r> for all u, r.
Tensor apply_A(const Tensor& u, const ModelParams& p);  // d x H x W -> H x W
Tensor apply_At(const Tensor& r, const ModelParams& p); // H x W -> d x H x W

/// Derivative of phi(g) = nu |g|^2 + sqrt(|g|^2 + eps^2):
/// 2 nu g + g / sqrt(|g|^2 + eps^2), per pixel. Quadratic-only mode
/// (tv_enabled = false) drops the second term.
GradField phi_prime(const GradField& g, const ModelParams& p);

/// sum (f - A u)^2 + mu sum_c sum_px (nu |grad u_c|^2 + sqrt(|grad u_c|^2 + eps^2) - eps).
/// The -eps offset makes the smoothed length term vanish on constants.
double eval_energy(const Tensor& u, const Tensor& f, const ModelParams& p);

/// Nonlinear operator F(u) = A^T(A u) - mu div(phi'(grad u)), per channel.
Tensor apply_F(const Tensor& u, const ModelParams& p);

/// b - F(u).
Tensor residual(const Tensor& u, const Tensor& b, const ModelParams& p);

} // namespace fasu

#endif
