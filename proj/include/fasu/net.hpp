#ifndef FASU_NET_HPP
#define FASU_NET_HPP

#include "fasu/fusion.hpp"
#include "fasu/tape.hpp"
#include "fasu/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fasu::net {

enum class InitMode { zero, random, learned_conv };

struct NetConfig {
    std::size_t levels = 5;   // grid cycles L
    std::size_t channels = 64; // feature channels p
    std::size_t k_pre = 3;    // pre-smoothing iterations per level
    std::size_t k_coarse = 7; // coarsest-smoothing iterations
    std::size_t k_post = 4;   // post-smoothing iterations per level
    std::size_t classes = 5;  // c
    std::size_t in_channels = 1;
    std::size_t kernel_extent = 3;
    bool weight_share_inner = false; // share the per-iteration correction kernels
    InitMode init_mode = InitMode::learned_conv;
    std::size_t spatial_dims = 2; // 3 honored only by param_count
    double channel_ratio = 1.0;   // r in the 3D kernel count

    void validate() const;
};

struct TrainConfig {
    double lr0 = 0.01;
    double momentum = 0.99;
    double weight_decay = 1e-4;
    std::size_t batch_size = 4;
    std::size_t max_epochs = 150;
    double poly_power = 0.9;
    std::uint64_t seed = 0;
};

struct ParamEntry {
    Tensor value;
    Tensor grad;
    Tensor momentum;
    bool trainable = true;
    bool bn_affine = false; // excluded from weight decay
};

/// Named trainable kernels with paired gradient and momentum buffers,
/// plus batch-norm affine/statistics entries. Enumeration order is the
/// deterministic creation order.
class ParamStore {
public:
    ParamEntry& add(const std::string& name, Tensor value, bool trainable = true,
                    bool bn_affine = false);
    ParamEntry& at(const std::string& name);
    const ParamEntry& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

    void zero_grads();
    std::size_t trainable_count() const; // total scalar parameters

private:
    std::vector<std::string> order_;
    std::map<std::string, ParamEntry> entries_;
};

/// BnState views over the running-statistics entries of a ParamStore.
BnState bn_state(ParamStore& params, const std::string& prefix);
void store_bn_state(ParamStore& params, const std::string& prefix, const BnState& st);

/// Kaiming fan-in initialization for all kernels, batch-norm scale 1/shift 0.
ParamStore init_params(const NetConfig& cfg, std::uint64_t seed);

struct ForwardResult {
    Tape tape;
    Tape::NodeId probs;                              // N x c x H x W
    std::map<std::string, Tape::NodeId> param_nodes; // leaf per trainable entry
};

/// One V-shaped pass: initial feature lift, descend {pre-smooth; downsample},
/// coarsest smoothing, ascend {correction; post-smooth}, 1x1 fusion + softmax.
ForwardResult forward(const Tensor& images, ParamStore& params, const NetConfig& cfg,
                      bool train_mode);

/// Runs forward + cross-entropy; returns the loss node.
struct LossResult {
    ForwardResult fwd;
    Tape::NodeId loss;
};
LossResult forward_loss(const Tensor& images, const Tensor& one_hot_labels, ParamStore& params,
                        const NetConfig& cfg, bool train_mode);

/// Copies tape gradients back into the store's grad buffers.
void collect_grads(ForwardResult& fwd, ParamStore& params);

SegMask predict(const Tensor& probs_single); // c x H x W -> argmax labels

/// Polynomial learning-rate decay, SGD with momentum and weight decay
/// (decay skips batch-norm affine entries).
double poly_lr(std::size_t epoch, const TrainConfig& cfg);
void sgd_step(ParamStore& params, std::size_t epoch, const TrainConfig& cfg);

struct ParamCount {
    std::uint64_t kernel_unit;     // parameters of one p-to-p convolution
    std::uint64_t multiplier;      // (k_m + 1) + (L - 1)(k_l + k_r + 5)
    std::uint64_t multiplier_term; // multiplier * kernel_unit
    std::uint64_t formula_total;   // + input lift kernel
    std::uint64_t instantiated;    // enumerated store incl. fusion head and BN affine (2D only)
};
ParamCount param_count(const NetConfig& cfg);

struct TrainSample {
    Tensor image; // c_in x H x W
    SegMask labels;
};

struct TrainResult {
    std::vector<double> loss_trace; // per epoch, mean over batches
    std::vector<double> dsc_trace;  // per epoch, mean foreground DSC over the set
};

TrainResult train(std::vector<TrainSample>& dataset, ParamStore& params, const NetConfig& cfg,
                  const TrainConfig& tcfg);

/// Central-difference probe of random kernel entries against the recorded
/// gradients (eval-mode batch norm); returns the worst relative error.
double gradient_check(ParamStore& params, const Tensor& images, const Tensor& one_hot_labels,
                      const NetConfig& cfg, std::size_t n_probes, double step = 1e-6,
                      std::uint64_t seed = 0);

} // namespace fasu::net

#endif
