#ifndef FASU_TENSOR_HPP
#define FASU_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fasu {

/// Dense row-major tensor of 64-bit floats, rank 1..4.
/// Image-like data is laid out channels-then-rows-then-columns.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor random_normal(std::vector<std::size_t> shape, std::uint64_t seed,
                                double stddev = 1.0);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Rank-2 (row, col) and rank-3 (channel, row, col) accessors.
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t c, std::size_t i, std::size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    double at(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Elementwise algebra. Binary ops require matching shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
void add_inplace(Tensor& a, const Tensor& b, double factor = 1.0);
double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double norm_inf(const Tensor& a);

/// Forward-difference gradient components of a rank-2 field,
/// zero at the last column (gx) / last row (gy) under replicate boundaries.
struct GradField {
    Tensor gx;
    Tensor gy;
};

GradField grad_forward(const Tensor& image);

/// Discrete divergence, the exact negative adjoint of grad_forward:
/// <grad u, g> = -<u, div g> for all u, g.
Tensor div_backward(const GradField& g);

} // namespace fasu

#endif
