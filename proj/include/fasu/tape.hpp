#ifndef FASU_TAPE_HPP
#define FASU_TAPE_HPP

#include "fasu/tensor.hpp"

#include <functional>
#include <vector>

namespace fasu::net {

/// Record of one forward pass. Nodes are created in topological order, so
/// a single reverse sweep visits each exactly once; gradients accumulate
/// additively into parent buffers.
class Tape {
public:
    using NodeId = int;

    NodeId leaf(Tensor value);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor& grad(NodeId id);
    bool has_grad(NodeId id) const {
        return nodes_[static_cast<std::size_t>(id)].grad.size() > 0;
    }

    NodeId record(Tensor value, std::function<void(Tape&, NodeId)> backward);

    /// Reverse sweep from a scalar root (seeds its gradient with 1).
    void backward(NodeId root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad; // empty until touched
        std::function<void(Tape&, NodeId)> backward;
    };
    std::vector<Node> nodes_;
};

/// Per-instance batch-norm state: running statistics plus configuration.
struct BnState {
    Tensor run_mean; // length C
    Tensor run_var;  // length C
    double momentum = 0.1;
    double var_floor = 1e-5;

    explicit BnState(std::size_t channels = 0);
};

// All network ops take N x C x H x W values; kernels are Cout x Cin x k x k.

/// Cross-correlation, zero padding (k-1)/2, stride 1 or 2 (ceiling extents).
Tape::NodeId conv2d(Tape& t, Tape::NodeId x, Tape::NodeId kernel, std::size_t stride = 1);

/// Exact adjoint of the stride-2 conv2d with the same kernel; maps the
/// kernel's Cout channels back to Cin at the given fine extents.
Tape::NodeId deconv2d(Tape& t, Tape::NodeId x, Tape::NodeId kernel, std::size_t h_out,
                      std::size_t w_out);

Tape::NodeId add(Tape& t, Tape::NodeId a, Tape::NodeId b);
Tape::NodeId sub(Tape& t, Tape::NodeId a, Tape::NodeId b);
Tape::NodeId relu(Tape& t, Tape::NodeId x);

/// Per-channel normalization over batch and space, then affine scale/shift.
/// Train mode uses batch statistics and updates `state`; eval mode uses the
/// running statistics and is a fixed affine map.
Tape::NodeId batchnorm(Tape& t, Tape::NodeId x, Tape::NodeId gamma, Tape::NodeId beta,
                       BnState& state, bool train);

Tape::NodeId softmax_channels(Tape& t, Tape::NodeId x);

/// Negated mean over pixels and samples of
/// sum_c [ t log s + (1 - t) log(1 - s) ], probabilities clamped at 1e-12.
Tape::NodeId cross_entropy(Tape& t, Tape::NodeId probs, const Tensor& one_hot_labels);

} // namespace fasu::net

#endif
