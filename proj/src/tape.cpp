#include "fasu/tape.hpp"

#include "fasu/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace fasu::net {

Tape::NodeId Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::record(Tensor value, std::function<void(Tape&, NodeId)> backward) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backward)});
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

void Tape::backward(NodeId root) {
    if (value(root).size() != 1)
        throw std::invalid_argument("backward expects a scalar root");
    grad(root)[0] = 1.0;
    for (NodeId id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.backward && n.grad.size() > 0) n.backward(*this, id);
    }
}

BnState::BnState(std::size_t channels)
    : run_mean(channels > 0 ? Tensor::zeros({channels}) : Tensor{}),
      run_var(channels > 0 ? Tensor::full({channels}, 1.0) : Tensor{}) {}

namespace {

struct ConvDims {
    std::size_t N, Cin, H, W, Cout, K;
    long pad;
    std::size_t stride, Ho, Wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, std::size_t stride) {
    if (x.rank() != 4 || w.rank() != 4)
        throw std::invalid_argument("conv2d expects N x C x H x W input and 4D kernel");
    if (w.extent(2) != w.extent(3)) throw std::invalid_argument("conv2d kernel must be square");
    if (x.extent(1) != w.extent(1))
        throw std::invalid_argument("conv2d channel mismatch");
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d stride must be 1 or 2");
    ConvDims d;
    d.N = x.extent(0);
    d.Cin = x.extent(1);
    d.H = x.extent(2);
    d.W = x.extent(3);
    d.Cout = w.extent(0);
    d.K = w.extent(2);
    d.pad = static_cast<long>(d.K - 1) / 2;
    d.stride = stride;
    d.Ho = (d.H + stride - 1) / stride;
    d.Wo = (d.W + stride - 1) / stride;
    return d;
}

// out[n,co,oi,oj] = sum_{ci,ky,kx} w[co,ci,ky,kx] x[n,ci,oi*s+ky-pad,oj*s+kx-pad]
Tensor corr(const Tensor& x, const Tensor& w, std::size_t stride) {
    const ConvDims d = conv_dims(x, w, stride);
    Tensor out({d.N, d.Cout, d.Ho, d.Wo});
    const auto& k = kernels::active();
    for (std::size_t n = 0; n < d.N; ++n)
        for (std::size_t co = 0; co < d.Cout; ++co) {
            double* oc = out.data() + (n * d.Cout + co) * d.Ho * d.Wo;
            for (std::size_t ci = 0; ci < d.Cin; ++ci) {
                const double* xc = x.data() + (n * d.Cin + ci) * d.H * d.W;
                const double* wc = w.data() + (co * d.Cin + ci) * d.K * d.K;
                for (std::size_t ky = 0; ky < d.K; ++ky)
                    for (std::size_t kx = 0; kx < d.K; ++kx) {
                        const double wv = wc[ky * d.K + kx];
                        if (wv == 0.0) continue;
                        const long dy = static_cast<long>(ky) - d.pad;
                        const long dx = static_cast<long>(kx) - d.pad;
                        if (stride == 1) {
                            // row-parallel: oj + dx in [0, W)
                            const std::size_t j0 =
                                dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                            const std::size_t j1 =
                                dx > 0 ? d.Wo - static_cast<std::size_t>(dx) : d.Wo;
                            if (j0 >= j1) continue;
                            for (std::size_t oi = 0; oi < d.Ho; ++oi) {
                                const long ii = static_cast<long>(oi) + dy;
                                if (ii < 0 || ii >= static_cast<long>(d.H)) continue;
                                k.madd(j1 - j0, wv,
                                       xc + static_cast<std::size_t>(ii) * d.W + j0 +
                                           static_cast<std::size_t>(dx),
                                       oc + oi * d.Wo + j0);
                            }
                        } else {
                            for (std::size_t oi = 0; oi < d.Ho; ++oi) {
                                const long ii = static_cast<long>(oi * 2) + dy;
                                if (ii < 0 || ii >= static_cast<long>(d.H)) continue;
                                const double* xr = xc + static_cast<std::size_t>(ii) * d.W;
                                double* orow = oc + oi * d.Wo;
                                for (std::size_t oj = 0; oj < d.Wo; ++oj) {
                                    const long jj = static_cast<long>(oj * 2) + dx;
                                    if (jj < 0 || jj >= static_cast<long>(d.W)) continue;
                                    orow[oj] += wv * xr[static_cast<std::size_t>(jj)];
                                }
                            }
                        }
                    }
            }
        }
    return out;
}

// Adjoint of corr in its first argument:
// gx[n,ci,ii,jj] += sum w[co,ci,ky,kx] gy[n,co,oi,oj] with ii = oi*s+ky-pad.
void corr_back_input(const Tensor& gy, const Tensor& w, std::size_t stride, Tensor& gx) {
    const ConvDims d = conv_dims(gx, w, stride);
    const auto& k = kernels::active();
    for (std::size_t n = 0; n < d.N; ++n)
        for (std::size_t co = 0; co < d.Cout; ++co) {
            const double* gc = gy.data() + (n * d.Cout + co) * d.Ho * d.Wo;
            for (std::size_t ci = 0; ci < d.Cin; ++ci) {
                double* xc = gx.data() + (n * d.Cin + ci) * d.H * d.W;
                const double* wc = w.data() + (co * d.Cin + ci) * d.K * d.K;
                for (std::size_t ky = 0; ky < d.K; ++ky)
                    for (std::size_t kx = 0; kx < d.K; ++kx) {
                        const double wv = wc[ky * d.K + kx];
                        if (wv == 0.0) continue;
                        const long dy = static_cast<long>(ky) - d.pad;
                        const long dx = static_cast<long>(kx) - d.pad;
                        if (stride == 1) {
                            const std::size_t j0 =
                                dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                            const std::size_t j1 =
                                dx > 0 ? d.Wo - static_cast<std::size_t>(dx) : d.Wo;
                            if (j0 >= j1) continue;
                            for (std::size_t oi = 0; oi < d.Ho; ++oi) {
                                const long ii = static_cast<long>(oi) + dy;
                                if (ii < 0 || ii >= static_cast<long>(d.H)) continue;
                                k.madd(j1 - j0, wv, gc + oi * d.Wo + j0,
                                       xc + static_cast<std::size_t>(ii) * d.W + j0 +
                                           static_cast<std::size_t>(dx));
                            }
                        } else {
                            for (std::size_t oi = 0; oi < d.Ho; ++oi) {
                                const long ii = static_cast<long>(oi * 2) + dy;
                                if (ii < 0 || ii >= static_cast<long>(d.H)) continue;
                                double* xr = xc + static_cast<std::size_t>(ii) * d.W;
                                const double* grow = gc + oi * d.Wo;
                                for (std::size_t oj = 0; oj < d.Wo; ++oj) {
                                    const long jj = static_cast<long>(oj * 2) + dx;
                                    if (jj < 0 || jj >= static_cast<long>(d.W)) continue;
                                    xr[static_cast<std::size_t>(jj)] += wv * grow[oj];
                                }
                            }
                        }
                    }
            }
        }
}

// gw[co,ci,ky,kx] += sum_{n,oi,oj} x[n,ci,oi*s+ky-pad,oj*s+kx-pad] gy[n,co,oi,oj]
void corr_back_weight(const Tensor& x, const Tensor& gy, std::size_t stride, Tensor& gw) {
    const ConvDims d = conv_dims(x, gw, stride);
    const auto& k = kernels::active();
    for (std::size_t n = 0; n < d.N; ++n)
        for (std::size_t co = 0; co < d.Cout; ++co) {
            const double* gc = gy.data() + (n * d.Cout + co) * d.Ho * d.Wo;
            for (std::size_t ci = 0; ci < d.Cin; ++ci) {
                const double* xc = x.data() + (n * d.Cin + ci) * d.H * d.W;
                double* wc = gw.data() + (co * d.Cin + ci) * d.K * d.K;
                for (std::size_t ky = 0; ky < d.K; ++ky)
                    for (std::size_t kx = 0; kx < d.K; ++kx) {
                        const long dy = static_cast<long>(ky) - d.pad;
                        const long dx = static_cast<long>(kx) - d.pad;
                        double acc = 0.0;
                        if (stride == 1) {
                            const std::size_t j0 =
                                dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                            const std::size_t j1 =
                                dx > 0 ? d.Wo - static_cast<std::size_t>(dx) : d.Wo;
                            if (j0 >= j1) continue;
                            for (std::size_t oi = 0; oi < d.Ho; ++oi) {
                                const long ii = static_cast<long>(oi) + dy;
                                if (ii < 0 || ii >= static_cast<long>(d.H)) continue;
                                acc += k.dot(j1 - j0,
                                             xc + static_cast<std::size_t>(ii) * d.W + j0 +
                                                 static_cast<std::size_t>(dx),
                                             gc + oi * d.Wo + j0);
                            }
                        } else {
                            for (std::size_t oi = 0; oi < d.Ho; ++oi) {
                                const long ii = static_cast<long>(oi * 2) + dy;
                                if (ii < 0 || ii >= static_cast<long>(d.H)) continue;
                                const double* xr = xc + static_cast<std::size_t>(ii) * d.W;
                                const double* grow = gc + oi * d.Wo;
                                for (std::size_t oj = 0; oj < d.Wo; ++oj) {
                                    const long jj = static_cast<long>(oj * 2) + dx;
                                    if (jj < 0 || jj >= static_cast<long>(d.W)) continue;
                                    acc += xr[static_cast<std::size_t>(jj)] * grow[oj];
                                }
                            }
                        }
                        wc[ky * d.K + kx] += acc;
                    }
            }
        }
}

} // namespace

Tape::NodeId conv2d(Tape& t, Tape::NodeId x, Tape::NodeId kernel, std::size_t stride) {
    Tensor out = corr(t.value(x), t.value(kernel), stride);
    return t.record(std::move(out), [x, kernel, stride](Tape& tp, Tape::NodeId self) {
        const Tensor& gy = tp.grad(self);
        corr_back_input(gy, tp.value(kernel), stride, tp.grad(x));
        corr_back_weight(tp.value(x), gy, stride, tp.grad(kernel));
    });
}

Tape::NodeId deconv2d(Tape& t, Tape::NodeId x, Tape::NodeId kernel, std::size_t h_out,
                      std::size_t w_out) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(kernel);
    if (xv.rank() != 4 || wv.rank() != 4)
        throw std::invalid_argument("deconv2d expects 4D input and kernel");
    if (xv.extent(1) != wv.extent(0))
        throw std::invalid_argument("deconv2d channel mismatch");
    if (xv.extent(2) != (h_out + 1) / 2 || xv.extent(3) != (w_out + 1) / 2)
        throw std::invalid_argument("deconv2d target extents inconsistent with input");
    Tensor out = Tensor::zeros({xv.extent(0), wv.extent(1), h_out, w_out});
    corr_back_input(xv, wv, 2, out);
    return t.record(std::move(out), [x, kernel](Tape& tp, Tape::NodeId self) {
        const Tensor& gy = tp.grad(self);
        add_inplace(tp.grad(x), corr(gy, tp.value(kernel), 2));
        corr_back_weight(gy, tp.value(x), 2, tp.grad(kernel));
    });
}

Tape::NodeId add(Tape& t, Tape::NodeId a, Tape::NodeId b) {
    return t.record(fasu::add(t.value(a), t.value(b)), [a, b](Tape& tp, Tape::NodeId self) {
        add_inplace(tp.grad(a), tp.grad(self));
        add_inplace(tp.grad(b), tp.grad(self));
    });
}

Tape::NodeId sub(Tape& t, Tape::NodeId a, Tape::NodeId b) {
    return t.record(fasu::sub(t.value(a), t.value(b)), [a, b](Tape& tp, Tape::NodeId self) {
        add_inplace(tp.grad(a), tp.grad(self));
        add_inplace(tp.grad(b), tp.grad(self), -1.0);
    });
}

Tape::NodeId relu(Tape& t, Tape::NodeId x) {
    const Tensor& xv = t.value(x);
    Tensor out(xv.shape());
    kernels::active().relu(xv.size(), xv.data(), out.data());
    return t.record(std::move(out), [x](Tape& tp, Tape::NodeId self) {
        const Tensor& gy = tp.grad(self);
        const Tensor& xv = tp.value(x);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < xv.size(); ++i)
            if (xv[i] > 0.0) gx[i] += gy[i];
    });
}

Tape::NodeId batchnorm(Tape& t, Tape::NodeId x, Tape::NodeId gamma, Tape::NodeId beta,
                       BnState& state, bool train) {
    const Tensor& xv = t.value(x);
    if (xv.rank() != 4) throw std::invalid_argument("batchnorm expects N x C x H x W");
    const std::size_t N = xv.extent(0), C = xv.extent(1), HW = xv.extent(2) * xv.extent(3);
    if (t.value(gamma).size() != C || t.value(beta).size() != C ||
        state.run_mean.size() != C)
        throw std::invalid_argument("batchnorm parameter length mismatch");
    const double m = static_cast<double>(N * HW);

    Tensor mean({C}), invstd({C});
    if (train) {
        Tensor var({C});
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* p = xv.data() + (n * C + c) * HW;
                for (std::size_t i = 0; i < HW; ++i) s += p[i];
            }
            mean[c] = s / m;
            double v = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* p = xv.data() + (n * C + c) * HW;
                for (std::size_t i = 0; i < HW; ++i) {
                    const double d = p[i] - mean[c];
                    v += d * d;
                }
            }
            var[c] = v / m;
            invstd[c] = 1.0 / std::sqrt(var[c] + state.var_floor);
            state.run_mean[c] = (1.0 - state.momentum) * state.run_mean[c] +
                                state.momentum * mean[c];
            state.run_var[c] = (1.0 - state.momentum) * state.run_var[c] +
                               state.momentum * var[c];
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = state.run_mean[c];
            invstd[c] = 1.0 / std::sqrt(state.run_var[c] + state.var_floor);
        }
    }

    const Tensor& gv = t.value(gamma);
    const Tensor& bv = t.value(beta);
    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double* p = xv.data() + (n * C + c) * HW;
            double* xh = xhat.data() + (n * C + c) * HW;
            double* o = out.data() + (n * C + c) * HW;
            for (std::size_t i = 0; i < HW; ++i) {
                xh[i] = (p[i] - mean[c]) * invstd[c];
                o[i] = gv[c] * xh[i] + bv[c];
            }
        }

    return t.record(std::move(out), [x, gamma, beta, xhat = std::move(xhat),
                                     invstd = std::move(invstd), train, N, C, HW,
                                     m](Tape& tp, Tape::NodeId self) {
        const Tensor& gy = tp.grad(self);
        const Tensor& gv = tp.value(gamma);
        Tensor& gx = tp.grad(x);
        Tensor& gg = tp.grad(gamma);
        Tensor& gb = tp.grad(beta);
        for (std::size_t c = 0; c < C; ++c) {
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* g = gy.data() + (n * C + c) * HW;
                const double* xh = xhat.data() + (n * C + c) * HW;
                for (std::size_t i = 0; i < HW; ++i) {
                    sum_gy += g[i];
                    sum_gy_xhat += g[i] * xh[i];
                }
            }
            gg[c] += sum_gy_xhat;
            gb[c] += sum_gy;
            const double a = gv[c] * invstd[c];
            for (std::size_t n = 0; n < N; ++n) {
                const double* g = gy.data() + (n * C + c) * HW;
                const double* xh = xhat.data() + (n * C + c) * HW;
                double* gxp = gx.data() + (n * C + c) * HW;
                for (std::size_t i = 0; i < HW; ++i) {
                    if (train)
                        gxp[i] += a * (g[i] - sum_gy / m - xh[i] * sum_gy_xhat / m);
                    else
                        gxp[i] += a * g[i];
                }
            }
        }
    });
}

Tape::NodeId softmax_channels(Tape& t, Tape::NodeId x) {
    const Tensor& xv = t.value(x);
    if (xv.rank() != 4) throw std::invalid_argument("softmax_channels expects N x C x H x W");
    const std::size_t N = xv.extent(0), C = xv.extent(1), HW = xv.extent(2) * xv.extent(3);
    Tensor out(xv.shape());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) {
            double mx = xv[(n * C) * HW + i];
            for (std::size_t c = 1; c < C; ++c)
                mx = std::max(mx, xv[(n * C + c) * HW + i]);
            double z = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double e = std::exp(xv[(n * C + c) * HW + i] - mx);
                out[(n * C + c) * HW + i] = e;
                z += e;
            }
            for (std::size_t c = 0; c < C; ++c) out[(n * C + c) * HW + i] /= z;
        }
    return t.record(std::move(out), [x, N, C, HW](Tape& tp, Tape::NodeId self) {
        const Tensor& s = tp.value(self);
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t i = 0; i < HW; ++i) {
                double acc = 0.0;
                for (std::size_t c = 0; c < C; ++c)
                    acc += gy[(n * C + c) * HW + i] * s[(n * C + c) * HW + i];
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t idx = (n * C + c) * HW + i;
                    gx[idx] += s[idx] * (gy[idx] - acc);
                }
            }
    });
}

namespace {
constexpr double kProbLo = 1e-12;
constexpr double kProbHi = 1.0 - 1e-12;
} // namespace

Tape::NodeId cross_entropy(Tape& t, Tape::NodeId probs, const Tensor& one_hot_labels) {
    const Tensor& s = t.value(probs);
    if (!s.same_shape(one_hot_labels))
        throw std::invalid_argument("cross_entropy shape mismatch");
    if (s.rank() != 4) throw std::invalid_argument("cross_entropy expects N x C x H x W");
    const double pixels =
        static_cast<double>(s.extent(0) * s.extent(2) * s.extent(3));
    double loss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double sc = std::min(std::max(s[i], kProbLo), kProbHi);
        const double tv = one_hot_labels[i];
        loss += tv * std::log(sc) + (1.0 - tv) * std::log(1.0 - sc);
    }
    Tensor out({1});
    out[0] = -loss / pixels;
    return t.record(std::move(out),
                    [probs, labels = one_hot_labels, pixels](Tape& tp, Tape::NodeId self) {
                        const double g0 = tp.grad(self)[0];
                        const Tensor& s = tp.value(probs);
                        Tensor& gs = tp.grad(probs);
                        for (std::size_t i = 0; i < s.size(); ++i) {
                            if (s[i] <= kProbLo || s[i] >= kProbHi) continue; // clamped, zero slope
                            const double tv = labels[i];
                            gs[i] += g0 * (-(tv / s[i] - (1.0 - tv) / (1.0 - s[i])) / pixels);
                        }
                    });
}

} // namespace fasu::net
