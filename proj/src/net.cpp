#include "fasu/net.hpp"

#include "fasu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace fasu::net {

void NetConfig::validate() const {
    if (levels < 2) throw std::invalid_argument("levels must be >= 2");
    if (channels < 1 || classes < 1 || in_channels < 1)
        throw std::invalid_argument("channel/class counts must be positive");
    if (kernel_extent % 2 == 0) throw std::invalid_argument("kernel_extent must be odd");
    if (spatial_dims != 2 && spatial_dims != 3)
        throw std::invalid_argument("spatial_dims must be 2 or 3");
}

ParamEntry& ParamStore::add(const std::string& name, Tensor value, bool trainable,
                            bool bn_affine) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
    order_.push_back(name);
    ParamEntry e;
    e.grad = Tensor::zeros(value.shape());
    e.momentum = Tensor::zeros(value.shape());
    e.value = std::move(value);
    e.trainable = trainable;
    e.bn_affine = bn_affine;
    return entries_.emplace(name, std::move(e)).first->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("unknown parameter " + name);
    return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("unknown parameter " + name);
    return it->second;
}

bool ParamStore::contains(const std::string& name) const { return entries_.count(name) > 0; }

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_)
        e.grad = Tensor::zeros(e.grad.shape());
}

std::size_t ParamStore::trainable_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_)
        if (e.trainable) n += e.value.size();
    return n;
}

BnState bn_state(ParamStore& params, const std::string& prefix) {
    BnState st;
    st.run_mean = params.at(prefix + ".run_mean").value;
    st.run_var = params.at(prefix + ".run_var").value;
    return st;
}

void store_bn_state(ParamStore& params, const std::string& prefix, const BnState& st) {
    params.at(prefix + ".run_mean").value = st.run_mean;
    params.at(prefix + ".run_var").value = st.run_var;
}

namespace {

struct KernelDesc {
    std::string name;
    std::size_t cout, cin, k;
    bool with_bn;
};

std::string level_prefix(std::size_t l) { return "L" + std::to_string(l); }

std::size_t inner_count(const NetConfig& cfg, std::size_t k_q) {
    return cfg.weight_share_inner ? std::min<std::size_t>(1, k_q) : k_q;
}

// theta_1 inventory plus the fusion head, in deterministic creation order.
std::vector<KernelDesc> enumerate_kernels(const NetConfig& cfg) {
    const std::size_t p = cfg.channels, k = cfg.kernel_extent;
    std::vector<KernelDesc> out;
    out.push_back({"K0", p, cfg.in_channels, k, true});
    for (std::size_t l = 1; l < cfg.levels; ++l) {
        const std::string pre = level_prefix(l);
        out.push_back({pre + ".K_down", p, p, k, false});
        out.push_back({pre + ".K_up", p, p, k, false});
        out.push_back({pre + ".K", p, p, k, true});
        out.push_back({pre + ".K_pre", p, p, k, true});
        out.push_back({pre + ".K_post", p, p, k, true});
        for (std::size_t j = 0; j < inner_count(cfg, cfg.k_pre); ++j)
            out.push_back({pre + ".K_pre_c." + std::to_string(j), p, p, k, true});
        for (std::size_t j = 0; j < inner_count(cfg, cfg.k_post); ++j)
            out.push_back({pre + ".K_post_c." + std::to_string(j), p, p, k, true});
    }
    const std::string cpre = level_prefix(cfg.levels);
    out.push_back({cpre + ".K_m", p, p, k, true});
    for (std::size_t j = 0; j < inner_count(cfg, cfg.k_coarse); ++j)
        out.push_back({cpre + ".K_m_c." + std::to_string(j), p, p, k, true});
    out.push_back({"Kp", cfg.classes, p, 1, false});
    return out;
}

} // namespace

ParamStore init_params(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore store;
    std::mt19937_64 rng(seed);
    for (const KernelDesc& d : enumerate_kernels(cfg)) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(d.cin * d.k * d.k));
        Tensor w({d.cout, d.cin, d.k, d.k});
        std::normal_distribution<double> dist(0.0, stddev);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
        store.add(d.name, std::move(w));
        if (d.with_bn) {
            store.add(d.name + ".bn.gamma", Tensor::full({d.cout}, 1.0), true, true);
            store.add(d.name + ".bn.beta", Tensor::zeros({d.cout}), true, true);
            store.add(d.name + ".bn.run_mean", Tensor::zeros({d.cout}), false);
            store.add(d.name + ".bn.run_var", Tensor::full({d.cout}, 1.0), false);
        }
    }
    return store;
}

namespace {

/// Wires one tape pass: leaves for parameters (created on first use),
/// operator helpers shared by the blocks.
struct PassContext {
    Tape& tape;
    ParamStore& params;
    const NetConfig& cfg;
    bool train_mode;
    std::map<std::string, Tape::NodeId>& param_nodes;

    Tape::NodeId leaf(const std::string& name) {
        auto it = param_nodes.find(name);
        if (it != param_nodes.end()) return it->second;
        const Tape::NodeId id = tape.leaf(params.at(name).value);
        param_nodes.emplace(name, id);
        return id;
    }

    // psi(phi(K x)): convolution, ReLU, then batch normalization.
    Tape::NodeId f_op(Tape::NodeId x, const std::string& kernel_name) {
        Tape::NodeId y = relu(tape, conv2d(tape, x, leaf(kernel_name), 1));
        BnState st = bn_state(params, kernel_name + ".bn");
        y = batchnorm(tape, y, leaf(kernel_name + ".bn.gamma"), leaf(kernel_name + ".bn.beta"),
                      st, train_mode);
        if (train_mode) store_bn_state(params, kernel_name + ".bn", st);
        return y;
    }

    std::string inner_name(const std::string& base, std::size_t j) const {
        return base + "." + std::to_string(cfg.weight_share_inner ? 0 : j);
    }

    // u <- u + psi(phi(K'_j (b - psi(phi(K_q u))))), k_q times.
    Tape::NodeId smoothing_block(Tape::NodeId u, Tape::NodeId b, const std::string& shared,
                                 const std::string& inner_base, std::size_t k_q) {
        for (std::size_t j = 0; j < k_q; ++j) {
            Tape::NodeId r = sub(tape, b, f_op(u, shared));
            u = add(tape, u, f_op(r, inner_name(inner_base, j)));
        }
        return u;
    }

    // Name of the per-level nonlinear operator kernel; the coarsest level
    // reuses the coarsest smoothing kernel so the parameter inventory
    // matches the closed-form count.
    std::string f_kernel(std::size_t level) const {
        return level < cfg.levels ? level_prefix(level) + ".K"
                                  : level_prefix(cfg.levels) + ".K_m";
    }

    // b_coarse = K_down(b - F(u_bar)) + F_coarse(K_down u_bar);
    // the same stride-2 kernel downsamples both operands.
    struct FdbOut {
        Tape::NodeId b_coarse;
        Tape::NodeId u_init;
    };
    FdbOut fdb(Tape::NodeId b, Tape::NodeId u_bar, std::size_t level) {
        const Tape::NodeId down = leaf(level_prefix(level) + ".K_down");
        Tape::NodeId r = sub(tape, b, f_op(u_bar, f_kernel(level)));
        Tape::NodeId restricted = conv2d(tape, r, down, 2);
        Tape::NodeId u_init = conv2d(tape, u_bar, down, 2);
        Tape::NodeId b_coarse = add(tape, restricted, f_op(u_init, f_kernel(level + 1)));
        return {b_coarse, u_init};
    }

    // u_bar + K_up(u_coarse - u_init), back at the fine extents.
    Tape::NodeId fcb(Tape::NodeId u_bar, Tape::NodeId u_coarse, Tape::NodeId u_init,
                     std::size_t level) {
        const Tensor& fine = tape.value(u_bar);
        Tape::NodeId diff = sub(tape, u_coarse, u_init);
        Tape::NodeId corr = deconv2d(tape, diff, leaf(level_prefix(level) + ".K_up"),
                                     fine.extent(2), fine.extent(3));
        return add(tape, u_bar, corr);
    }
};

} // namespace

ForwardResult forward(const Tensor& images, ParamStore& params, const NetConfig& cfg,
                      bool train_mode) {
    cfg.validate();
    if (images.rank() != 4 || images.extent(1) != cfg.in_channels)
        throw std::invalid_argument("forward expects N x c_in x H x W input");
    const std::size_t down_factor = std::size_t{1} << (cfg.levels - 1);
    if (images.extent(2) % down_factor != 0 || images.extent(3) % down_factor != 0)
        throw std::invalid_argument("input extents must be divisible by 2^(L-1)");

    ForwardResult res;
    PassContext ctx{res.tape, params, cfg, train_mode, res.param_nodes};

    // Initial feature lift b^1 = psi(K0 f) (batch norm, no activation).
    Tape::NodeId b = conv2d(res.tape, res.tape.leaf(images), ctx.leaf("K0"), 1);
    {
        BnState st = bn_state(params, "K0.bn");
        b = batchnorm(res.tape, b, ctx.leaf("K0.bn.gamma"), ctx.leaf("K0.bn.beta"), st,
                      train_mode);
        if (train_mode) store_bn_state(params, "K0.bn", st);
    }

    Tape::NodeId u;
    switch (cfg.init_mode) {
    case InitMode::zero:
        u = res.tape.leaf(Tensor::zeros(res.tape.value(b).shape()));
        break;
    case InitMode::random:
        u = res.tape.leaf(Tensor::random_normal(res.tape.value(b).shape(), 1234, 1.0));
        break;
    case InitMode::learned_conv:
    default:
        u = b;
        break;
    }

    // Descent: pre-smoothing then feature downsampling per level.
    std::vector<Tape::NodeId> b_stack{b}, u_bar_stack, u_init_stack;
    for (std::size_t l = 1; l < cfg.levels; ++l) {
        const std::string pre = level_prefix(l);
        u = ctx.smoothing_block(u, b_stack.back(), pre + ".K_pre", pre + ".K_pre_c", cfg.k_pre);
        auto [b_coarse, u_init] = ctx.fdb(b_stack.back(), u, l);
        u_bar_stack.push_back(u);
        u_init_stack.push_back(u_init);
        b_stack.push_back(b_coarse);
        u = u_init;
    }

    // Coarsest smoothing.
    {
        const std::string cpre = level_prefix(cfg.levels);
        u = ctx.smoothing_block(u, b_stack.back(), cpre + ".K_m", cpre + ".K_m_c",
                                cfg.k_coarse);
    }

    // Ascent: correction then post-smoothing per level.
    for (std::size_t l = cfg.levels - 1; l >= 1; --l) {
        const std::string pre = level_prefix(l);
        u = ctx.fcb(u_bar_stack[l - 1], u, u_init_stack[l - 1], l);
        u = ctx.smoothing_block(u, b_stack[l - 1], pre + ".K_post", pre + ".K_post_c",
                                cfg.k_post);
    }

    res.probs = softmax_channels(res.tape, conv2d(res.tape, u, ctx.leaf("Kp"), 1));
    return res;
}

LossResult forward_loss(const Tensor& images, const Tensor& one_hot_labels, ParamStore& params,
                        const NetConfig& cfg, bool train_mode) {
    LossResult r{forward(images, params, cfg, train_mode), 0};
    r.loss = cross_entropy(r.fwd.tape, r.fwd.probs, one_hot_labels);
    return r;
}

void collect_grads(ForwardResult& fwd, ParamStore& params) {
    for (const auto& [name, node] : fwd.param_nodes) {
        ParamEntry& e = params.at(name);
        if (!e.trainable) continue;
        if (fwd.tape.has_grad(node))
            add_inplace(e.grad, fwd.tape.grad(node));
    }
}

SegMask predict(const Tensor& probs_single) { return argmax_channels(probs_single); }

double poly_lr(std::size_t epoch, const TrainConfig& cfg) {
    const double frac = 1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.max_epochs);
    return cfg.lr0 * std::pow(std::max(frac, 0.0), cfg.poly_power);
}

void sgd_step(ParamStore& params, std::size_t epoch, const TrainConfig& cfg) {
    const double lr = poly_lr(epoch, cfg);
    for (const std::string& name : params.names()) {
        ParamEntry& e = params.at(name);
        if (!e.trainable) continue;
        const double wd = e.bn_affine ? 0.0 : cfg.weight_decay;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            e.momentum[i] = cfg.momentum * e.momentum[i] + e.grad[i] + wd * e.value[i];
            e.value[i] -= lr * e.momentum[i];
        }
    }
}

ParamCount param_count(const NetConfig& cfg) {
    cfg.validate();
    ParamCount pc{};
    const std::uint64_t p = cfg.channels, kc = cfg.kernel_extent;
    const std::uint64_t kc_pow = cfg.spatial_dims == 2 ? kc * kc : kc * kc * kc;
    const double r = cfg.spatial_dims == 2 ? 1.0 : cfg.channel_ratio;
    pc.kernel_unit =
        static_cast<std::uint64_t>(std::llround(r * r * static_cast<double>(p * p))) * kc_pow;
    pc.multiplier = (cfg.k_coarse + 1) +
                    (static_cast<std::uint64_t>(cfg.levels) - 1) * (cfg.k_pre + cfg.k_post + 5);
    pc.multiplier_term = pc.multiplier * pc.kernel_unit;
    const std::uint64_t p_eff =
        static_cast<std::uint64_t>(std::llround(r * static_cast<double>(p)));
    pc.formula_total = static_cast<std::uint64_t>(cfg.in_channels) * p_eff * kc_pow +
                       pc.multiplier_term;
    if (cfg.spatial_dims == 2) {
        ParamStore store = init_params(cfg, 0);
        pc.instantiated = store.trainable_count();
    }
    return pc;
}

TrainResult train(std::vector<TrainSample>& dataset, ParamStore& params, const NetConfig& cfg,
                  const TrainConfig& tcfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    const std::size_t n = dataset.size();
    const std::size_t H = dataset[0].image.extent(1), W = dataset[0].image.extent(2);
    for (const TrainSample& s : dataset)
        if (s.image.rank() != 3 || s.image.extent(0) != cfg.in_channels ||
            s.image.extent(1) != H || s.image.extent(2) != W || s.labels.height != H ||
            s.labels.width != W)
            throw std::invalid_argument("train: inconsistent sample shapes");

    auto stack = [&](const std::vector<std::size_t>& idx) {
        Tensor images({idx.size(), cfg.in_channels, H, W});
        Tensor labels({idx.size(), cfg.classes, H, W});
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const TrainSample& s = dataset[idx[b]];
            std::copy(s.image.data(), s.image.data() + s.image.size(),
                      images.data() + b * s.image.size());
            const Tensor oh = one_hot(s.labels, cfg.classes);
            std::copy(oh.data(), oh.data() + oh.size(), labels.data() + b * oh.size());
        }
        return std::pair{std::move(images), std::move(labels)};
    };

    TrainResult result;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(tcfg.seed);

    for (std::size_t epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
            std::vector<std::size_t> idx(
                order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() +
                    static_cast<std::ptrdiff_t>(std::min(start + tcfg.batch_size, n)));
            auto [images, labels] = stack(idx);
            LossResult lr = forward_loss(images, labels, params, cfg, true);
            const double loss = lr.fwd.tape.value(lr.loss)[0];
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged at epoch " +
                                         std::to_string(epoch));
            lr.fwd.tape.backward(lr.loss);
            params.zero_grads();
            collect_grads(lr.fwd, params);
            sgd_step(params, epoch, tcfg);
            epoch_loss += loss;
            ++batches;
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));

        // Training-set DSC in eval mode.
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        auto [images, labels] = stack(all);
        ForwardResult fwd = forward(images, params, cfg, false);
        const Tensor& probs = fwd.tape.value(fwd.probs);
        double dsc_sum = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            Tensor single({cfg.classes, H, W});
            std::copy(probs.data() + b * single.size(), probs.data() + (b + 1) * single.size(),
                      single.data());
            const MetricsReport rep =
                evaluate(predict(single), dataset[b].labels, cfg.classes);
            dsc_sum += rep.a_dsc;
        }
        result.dsc_trace.push_back(dsc_sum / static_cast<double>(n));
    }
    return result;
}

double gradient_check(ParamStore& params, const Tensor& images, const Tensor& one_hot_labels,
                      const NetConfig& cfg, std::size_t n_probes, double step,
                      std::uint64_t seed) {
    LossResult base = forward_loss(images, one_hot_labels, params, cfg, false);
    base.fwd.tape.backward(base.loss);
    params.zero_grads();
    collect_grads(base.fwd, params);

    std::vector<std::string> names;
    for (const std::string& name : params.names())
        if (params.at(name).trainable) names.push_back(name);

    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        const std::string& name =
            names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
        ParamEntry& e = params.at(name);
        const std::size_t idx =
            std::uniform_int_distribution<std::size_t>(0, e.value.size() - 1)(rng);
        const double saved = e.value[idx];

        e.value[idx] = saved + step;
        LossResult up = forward_loss(images, one_hot_labels, params, cfg, false);
        e.value[idx] = saved - step;
        LossResult dn = forward_loss(images, one_hot_labels, params, cfg, false);
        e.value[idx] = saved;

        const double fd =
            (up.fwd.tape.value(up.loss)[0] - dn.fwd.tape.value(dn.loss)[0]) / (2.0 * step);
        const double g = e.grad[idx];
        // near-zero gradients sit below the finite-difference noise floor;
        // compare them absolutely instead of relatively
        if (std::abs(fd - g) <= 1e-7) continue;
        const double rel = std::abs(fd - g) / (std::abs(fd) + std::abs(g));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace fasu::net
