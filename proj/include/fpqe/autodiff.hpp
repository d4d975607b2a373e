#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fpqe/common.hpp"
#include "fpqe/tensor.hpp"

// Tape-based reverse-mode autodiff over the fixed op set used by the
// convolutional encoder-decoder and its losses. Tensors are values; Vars are
// handles into an acyclic computation graph built eagerly by the ops below.

namespace fpqe::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents
};

inline Tensor& ensure_grad(Node& n) {
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape);
        n.has_grad = true;
    }
    return n.grad;
}

class Var {
public:
    Var() = default;
    explicit Var(Tensor t) : node_(std::make_shared<Node>()) { node_->value = std::move(t); }

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& value_mut() { return node_->value; }
    Tensor& grad() { return ensure_grad(*node_); }
    const NodePtr& node() const { return node_; }

    void zero_grad() {
        node_->has_grad = false;
        node_->grad = Tensor();
    }

private:
    NodePtr node_;
};

namespace detail {

inline Var make_result(Tensor value, std::vector<NodePtr> parents,
                       std::function<void(Node&)> backprop) {
    Var out{std::move(value)};
    out.node()->parents = std::move(parents);
    out.node()->backprop = std::move(backprop);
    return out;
}

// In-bounds kernel index range [lo, hi) such that pos*stride - pad + u lands in [0, extent).
inline void kernel_bounds(std::int64_t pos, std::int64_t stride, std::int64_t pad,
                          std::int64_t ksize, std::int64_t extent, std::int64_t& lo,
                          std::int64_t& hi) {
    const std::int64_t base = pos * stride - pad;
    lo = base < 0 ? -base : 0;
    hi = std::min<std::int64_t>(ksize, extent - base);
    if (hi < lo) hi = lo;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reverse accumulation from a scalar root.
// ---------------------------------------------------------------------------

inline void backward(const Var& root) {
    if (!root.defined() || root.value().size() != 1) {
        throw ShapeError("backward requires a scalar root, got " +
                         (root.defined() ? Tensor::shape_str(root.value().shape) : "<empty>"));
    }
    // Iterative post-order DFS; order ends with the root.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    ensure_grad(*root.node())[0] = 1.0;
    for (std::size_t i = order.size(); i-- > 0;) {
        Node* n = order[i];
        if (n->backprop && n->has_grad) n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

inline Var relu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    NodePtr xn = x.node();
    return detail::make_result(std::move(out), {xn}, [xn](Node& self) {
        Tensor& gx = ensure_grad(*xn);
        const Tensor& xv = xn->value;
        for (std::int64_t i = 0; i < xv.size(); ++i) {
            if (xv[i] > 0.0) gx[i] += self.grad[i];
        }
    });
}

inline Var sigmoid(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.data) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    NodePtr xn = x.node();
    Tensor saved = out;
    return detail::make_result(std::move(out), {xn}, [xn, saved](Node& self) {
        Tensor& gx = ensure_grad(*xn);
        for (std::int64_t i = 0; i < saved.size(); ++i) {
            gx[i] += self.grad[i] * saved[i] * (1.0 - saved[i]);
        }
    });
}

// ---------------------------------------------------------------------------
// Convolutions. Inputs may be [C,H,W] or [N,C,H,W]; conv weights are
// [C_out,C_in,k,k], transposed-conv weights [C_in,C_out,k,k]. Direct
// cross-correlation; padding is zero-fill.
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor as_batched(const Tensor& t, bool& was_3d) {
    if (t.rank() == 4) {
        was_3d = false;
        return t;
    }
    if (t.rank() == 3) {
        was_3d = true;
        return t.reshaped({1, t.shape[0], t.shape[1], t.shape[2]});
    }
    throw ShapeError("expected rank-3 or rank-4 input, got " + Tensor::shape_str(t.shape));
}

inline void conv4_forward(const Tensor& in, const Tensor& w, const Tensor& b, std::int64_t s,
                          std::int64_t p, Tensor& out) {
    const std::int64_t N = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::int64_t Co = w.shape[0], k = w.shape[2];
    const std::int64_t Ho = out.shape[2], Wo = out.shape[3];
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < Co; ++o) {
            const double bias = b[o];
            for (std::int64_t i = 0; i < Ho; ++i) {
                std::int64_t u0, u1;
                kernel_bounds(i, s, p, k, H, u0, u1);
                const std::int64_t ybase = i * s - p;
                for (std::int64_t j = 0; j < Wo; ++j) {
                    std::int64_t v0, v1;
                    kernel_bounds(j, s, p, k, W, v0, v1);
                    const std::int64_t xbase = j * s - p;
                    double acc = bias;
                    for (std::int64_t c = 0; c < Ci; ++c) {
                        for (std::int64_t u = u0; u < u1; ++u) {
                            const double* irow = &in.data[static_cast<std::size_t>(
                                ((n * Ci + c) * H + (ybase + u)) * W + xbase)];
                            const double* wrow = &w.data[static_cast<std::size_t>(
                                ((o * Ci + c) * k + u) * k)];
                            for (std::int64_t v = v0; v < v1; ++v) acc += irow[v] * wrow[v];
                        }
                    }
                    out.at4(n, o, i, j) = acc;
                }
            }
        }
    }
}

inline void conv4_backward(const Tensor& in, const Tensor& w, const Tensor& gout, std::int64_t s,
                           std::int64_t p, Tensor* gin, Tensor* gw, Tensor* gb) {
    const std::int64_t N = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::int64_t Co = w.shape[0], k = w.shape[2];
    const std::int64_t Ho = gout.shape[2], Wo = gout.shape[3];
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < Co; ++o) {
            for (std::int64_t i = 0; i < Ho; ++i) {
                std::int64_t u0, u1;
                kernel_bounds(i, s, p, k, H, u0, u1);
                const std::int64_t ybase = i * s - p;
                for (std::int64_t j = 0; j < Wo; ++j) {
                    std::int64_t v0, v1;
                    kernel_bounds(j, s, p, k, W, v0, v1);
                    const std::int64_t xbase = j * s - p;
                    const double g = gout.at4(n, o, i, j);
                    if (gb) (*gb)[o] += g;
                    for (std::int64_t c = 0; c < Ci; ++c) {
                        for (std::int64_t u = u0; u < u1; ++u) {
                            const std::size_t ioff = static_cast<std::size_t>(
                                ((n * Ci + c) * H + (ybase + u)) * W + xbase);
                            const std::size_t woff =
                                static_cast<std::size_t>(((o * Ci + c) * k + u) * k);
                            for (std::int64_t v = v0; v < v1; ++v) {
                                if (gin) gin->data[ioff + static_cast<std::size_t>(v)] +=
                                    g * w.data[woff + static_cast<std::size_t>(v)];
                                if (gw) gw->data[woff + static_cast<std::size_t>(v)] +=
                                    g * in.data[ioff + static_cast<std::size_t>(v)];
                            }
                        }
                    }
                }
            }
        }
    }
}

inline void convt4_forward(const Tensor& in, const Tensor& w, const Tensor& b, std::int64_t s,
                           std::int64_t p, Tensor& out) {
    const std::int64_t N = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::int64_t Co = w.shape[1], k = w.shape[2];
    const std::int64_t Ho = out.shape[2], Wo = out.shape[3];
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < Co; ++o) {
            for (std::int64_t y = 0; y < Ho; ++y) {
                for (std::int64_t x = 0; x < Wo; ++x) out.at4(n, o, y, x) = b[o];
            }
        }
        for (std::int64_t c = 0; c < Ci; ++c) {
            for (std::int64_t i = 0; i < H; ++i) {
                std::int64_t u0, u1;
                kernel_bounds(i, s, p, k, Ho, u0, u1);
                const std::int64_t ybase = i * s - p;
                for (std::int64_t j = 0; j < W; ++j) {
                    std::int64_t v0, v1;
                    kernel_bounds(j, s, p, k, Wo, v0, v1);
                    const std::int64_t xbase = j * s - p;
                    const double a = in.at4(n, c, i, j);
                    if (a == 0.0) continue;
                    for (std::int64_t o = 0; o < Co; ++o) {
                        for (std::int64_t u = u0; u < u1; ++u) {
                            double* orow = &out.data[static_cast<std::size_t>(
                                ((n * Co + o) * Ho + (ybase + u)) * Wo + xbase)];
                            const double* wrow = &w.data[static_cast<std::size_t>(
                                ((c * Co + o) * k + u) * k)];
                            for (std::int64_t v = v0; v < v1; ++v) orow[v] += a * wrow[v];
                        }
                    }
                }
            }
        }
    }
}

inline void convt4_backward(const Tensor& in, const Tensor& w, const Tensor& gout, std::int64_t s,
                            std::int64_t p, Tensor* gin, Tensor* gw, Tensor* gb) {
    const std::int64_t N = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::int64_t Co = w.shape[1], k = w.shape[2];
    const std::int64_t Ho = gout.shape[2], Wo = gout.shape[3];
    if (gb) {
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t o = 0; o < Co; ++o)
                for (std::int64_t y = 0; y < Ho; ++y)
                    for (std::int64_t x = 0; x < Wo; ++x) (*gb)[o] += gout.at4(n, o, y, x);
    }
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < Ci; ++c) {
            for (std::int64_t i = 0; i < H; ++i) {
                std::int64_t u0, u1;
                kernel_bounds(i, s, p, k, Ho, u0, u1);
                const std::int64_t ybase = i * s - p;
                for (std::int64_t j = 0; j < W; ++j) {
                    std::int64_t v0, v1;
                    kernel_bounds(j, s, p, k, Wo, v0, v1);
                    const std::int64_t xbase = j * s - p;
                    const double a = in.at4(n, c, i, j);
                    double acc = 0.0;
                    for (std::int64_t o = 0; o < Co; ++o) {
                        for (std::int64_t u = u0; u < u1; ++u) {
                            const double* grow = &gout.data[static_cast<std::size_t>(
                                ((n * Co + o) * Ho + (ybase + u)) * Wo + xbase)];
                            const std::size_t woff =
                                static_cast<std::size_t>(((c * Co + o) * k + u) * k);
                            for (std::int64_t v = v0; v < v1; ++v) {
                                acc += grow[v] * w.data[woff + static_cast<std::size_t>(v)];
                                if (gw) gw->data[woff + static_cast<std::size_t>(v)] += a * grow[v];
                            }
                        }
                    }
                    if (gin) gin->at4(n, c, i, j) += acc;
                }
            }
        }
    }
}

}  // namespace detail

inline Var conv2d(const Var& input, const Var& weight, const Var& bias, std::int64_t stride,
                  std::int64_t padding) {
    if (stride < 1) throw ConfigError("conv2d stride must be positive");
    if (padding < 0) throw ConfigError("conv2d padding must be non-negative");
    bool was_3d = false;
    Tensor in4 = detail::as_batched(input.value(), was_3d);
    const Tensor& w = weight.value();
    if (w.rank() != 4 || w.shape[2] != w.shape[3]) {
        throw ShapeError("conv2d weight must be [C_out,C_in,k,k], got " +
                         Tensor::shape_str(w.shape));
    }
    if (in4.shape[1] != w.shape[1]) {
        throw ShapeError("conv2d input channels " + std::to_string(in4.shape[1]) +
                         " vs weight C_in " + std::to_string(w.shape[1]));
    }
    if (bias.value().rank() != 1 || bias.value().shape[0] != w.shape[0]) {
        throw ShapeError("conv2d bias must be [C_out]");
    }
    const std::int64_t k = w.shape[2];
    const std::int64_t H = in4.shape[2], W = in4.shape[3];
    if (H + 2 * padding < k || W + 2 * padding < k) {
        throw ShapeError("conv2d window " + std::to_string(k) + " exceeds padded input " +
                         Tensor::shape_str(in4.shape));
    }
    const std::int64_t Ho = (H + 2 * padding - k) / stride + 1;
    const std::int64_t Wo = (W + 2 * padding - k) / stride + 1;
    Tensor out({in4.shape[0], w.shape[0], Ho, Wo});
    detail::conv4_forward(in4, w, bias.value(), stride, padding, out);
    if (was_3d) out = out.reshaped({w.shape[0], Ho, Wo});

    NodePtr xn = input.node(), wn = weight.node(), bn = bias.node();
    return detail::make_result(
        std::move(out), {xn, wn, bn}, [xn, wn, bn, stride, padding, was_3d](Node& self) {
            bool dummy = false;
            Tensor in4b = detail::as_batched(xn->value, dummy);
            Tensor gout = was_3d ? self.grad.reshaped({1, self.grad.shape[0], self.grad.shape[1],
                                                       self.grad.shape[2]})
                                 : self.grad;
            Tensor gin(in4b.shape);
            detail::conv4_backward(in4b, wn->value, gout, stride, padding, &gin,
                                   &ensure_grad(*wn), &ensure_grad(*bn));
            Tensor& gx = ensure_grad(*xn);
            for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gin[i];
        });
}

inline Var conv_transpose2d(const Var& input, const Var& weight, const Var& bias,
                            std::int64_t stride, std::int64_t padding,
                            std::int64_t output_padding = 0,
                            std::int64_t output_padding_w = -1) {
    if (output_padding_w < 0) output_padding_w = output_padding;
    if (stride < 1) throw ConfigError("conv_transpose2d stride must be positive");
    if (padding < 0 || output_padding < 0 || output_padding >= stride + 1 ||
        output_padding_w >= stride + 1) {
        throw ConfigError("conv_transpose2d padding arguments out of range");
    }
    bool was_3d = false;
    Tensor in4 = detail::as_batched(input.value(), was_3d);
    const Tensor& w = weight.value();
    if (w.rank() != 4 || w.shape[2] != w.shape[3]) {
        throw ShapeError("conv_transpose2d weight must be [C_in,C_out,k,k], got " +
                         Tensor::shape_str(w.shape));
    }
    if (in4.shape[1] != w.shape[0]) {
        throw ShapeError("conv_transpose2d input channels " + std::to_string(in4.shape[1]) +
                         " vs weight C_in " + std::to_string(w.shape[0]));
    }
    if (bias.value().rank() != 1 || bias.value().shape[0] != w.shape[1]) {
        throw ShapeError("conv_transpose2d bias must be [C_out]");
    }
    const std::int64_t k = w.shape[2];
    const std::int64_t Ho = (in4.shape[2] - 1) * stride - 2 * padding + k + output_padding;
    const std::int64_t Wo = (in4.shape[3] - 1) * stride - 2 * padding + k + output_padding_w;
    if (Ho < 1 || Wo < 1) {
        throw ShapeError("conv_transpose2d produces empty output for input " +
                         Tensor::shape_str(in4.shape));
    }
    Tensor out({in4.shape[0], w.shape[1], Ho, Wo});
    detail::convt4_forward(in4, w, bias.value(), stride, padding, out);
    if (was_3d) out = out.reshaped({w.shape[1], Ho, Wo});

    NodePtr xn = input.node(), wn = weight.node(), bn = bias.node();
    return detail::make_result(
        std::move(out), {xn, wn, bn}, [xn, wn, bn, stride, padding, was_3d](Node& self) {
            bool dummy = false;
            Tensor in4b = detail::as_batched(xn->value, dummy);
            Tensor gout = was_3d ? self.grad.reshaped({1, self.grad.shape[0], self.grad.shape[1],
                                                       self.grad.shape[2]})
                                 : self.grad;
            Tensor gin(in4b.shape);
            detail::convt4_backward(in4b, wn->value, gout, stride, padding, &gin,
                                    &ensure_grad(*wn), &ensure_grad(*bn));
            Tensor& gx = ensure_grad(*xn);
            for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gin[i];
        });
}

// ---------------------------------------------------------------------------
// Batch norm over [N,C,H,W]. Train mode normalizes by batch statistics and
// updates the running estimates in place; eval mode reads the running
// estimates and treats them as constants in the backward pass.
// ---------------------------------------------------------------------------

struct BatchNormState {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
};

inline BatchNormState make_batch_norm_state(std::int64_t channels) {
    BatchNormState s;
    s.running_mean = Tensor({channels}, 0.0);
    s.running_var = Tensor({channels}, 1.0);
    return s;
}

inline Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
                        bool train, double eps = 1e-5, double momentum = 0.1,
                        bool update_running = true) {
    const Tensor& xv = x.value();
    if (xv.rank() != 4) {
        throw ShapeError("batch_norm2d expects [N,C,H,W], got " + Tensor::shape_str(xv.shape));
    }
    const std::int64_t N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
    if (gamma.value().size() != C || beta.value().size() != C ||
        state.running_mean.size() != C || state.running_var.size() != C) {
        throw ShapeError("batch_norm2d parameter length does not match channel count " +
                         std::to_string(C));
    }
    const std::int64_t cnt = N * H * W;
    if (cnt < 1) throw ShapeError("batch_norm2d needs at least one element per channel");

    Tensor mean({C});
    Tensor inv_std({C});
    if (train) {
        for (std::int64_t c = 0; c < C; ++c) {
            double m = 0.0;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t y = 0; y < H; ++y)
                    for (std::int64_t z = 0; z < W; ++z) m += xv.at4(n, c, y, z);
            m /= static_cast<double>(cnt);
            double var = 0.0;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t y = 0; y < H; ++y)
                    for (std::int64_t z = 0; z < W; ++z) {
                        const double d = xv.at4(n, c, y, z) - m;
                        var += d * d;
                    }
            var /= static_cast<double>(cnt);
            mean[c] = m;
            inv_std[c] = 1.0 / std::sqrt(var + eps);
            if (update_running) {
                const double unbiased =
                    cnt > 1 ? var * static_cast<double>(cnt) / static_cast<double>(cnt - 1) : var;
                state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * m;
                state.running_var[c] =
                    (1.0 - momentum) * state.running_var[c] + momentum * unbiased;
            }
        }
    } else {
        for (std::int64_t c = 0; c < C; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
        }
    }

    Tensor xhat(xv.shape);
    Tensor out(xv.shape);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double g = gamma.value()[c], b = beta.value()[c];
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t z = 0; z < W; ++z) {
                    const double h = (xv.at4(n, c, y, z) - mean[c]) * inv_std[c];
                    xhat.at4(n, c, y, z) = h;
                    out.at4(n, c, y, z) = g * h + b;
                }
        }

    NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node();
    return detail::make_result(
        std::move(out), {xn, gn, bn}, [xn, gn, bn, xhat, inv_std, train, N, C, H, W](Node& self) {
            Tensor& gx = ensure_grad(*xn);
            Tensor& gg = ensure_grad(*gn);
            Tensor& gb = ensure_grad(*bn);
            const double cnt = static_cast<double>(N * H * W);
            for (std::int64_t c = 0; c < C; ++c) {
                double sum_g = 0.0, sum_gh = 0.0;
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t y = 0; y < H; ++y)
                        for (std::int64_t z = 0; z < W; ++z) {
                            const double g = self.grad.at4(n, c, y, z);
                            sum_g += g;
                            sum_gh += g * xhat.at4(n, c, y, z);
                        }
                gb[c] += sum_g;
                gg[c] += sum_gh;
                const double gamma_c = gn->value[c];
                if (train) {
                    const double mg = sum_g / cnt, mgh = sum_gh / cnt;
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t y = 0; y < H; ++y)
                            for (std::int64_t z = 0; z < W; ++z) {
                                const double g = self.grad.at4(n, c, y, z);
                                gx.at4(n, c, y, z) += gamma_c * inv_std[c] *
                                                      (g - mg - xhat.at4(n, c, y, z) * mgh);
                            }
                } else {
                    for (std::int64_t n = 0; n < N; ++n)
                        for (std::int64_t y = 0; y < H; ++y)
                            for (std::int64_t z = 0; z < W; ++z) {
                                gx.at4(n, c, y, z) +=
                                    gamma_c * inv_std[c] * self.grad.at4(n, c, y, z);
                            }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Pooling, reshape, normalization
// ---------------------------------------------------------------------------

inline Var max_pool2d(const Var& input, std::int64_t k, std::int64_t stride) {
    if (k < 1 || stride < 1) throw ConfigError("max_pool2d window and stride must be positive");
    bool was_3d = false;
    Tensor in4 = detail::as_batched(input.value(), was_3d);
    const std::int64_t N = in4.shape[0], C = in4.shape[1], H = in4.shape[2], W = in4.shape[3];
    if (H < k || W < k) {
        throw ShapeError("max_pool2d window " + std::to_string(k) + " exceeds input " +
                         Tensor::shape_str(input.value().shape));
    }
    const std::int64_t Ho = (H - k) / stride + 1;
    const std::int64_t Wo = (W - k) / stride + 1;
    Tensor out({N, C, Ho, Wo});
    // Flat argmax per output cell; first occurrence in row-major scan wins ties.
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.size()));
    std::size_t oi = 0;
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < Ho; ++i)
                for (std::int64_t j = 0; j < Wo; ++j, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int64_t best_idx = -1;
                    for (std::int64_t u = 0; u < k; ++u)
                        for (std::int64_t v = 0; v < k; ++v) {
                            const std::int64_t idx =
                                ((n * C + c) * H + (i * stride + u)) * W + (j * stride + v);
                            if (in4[idx] > best) {
                                best = in4[idx];
                                best_idx = idx;
                            }
                        }
                    out[static_cast<std::int64_t>(oi)] = best;
                    argmax[oi] = best_idx;
                }
    if (was_3d) out = out.reshaped({C, Ho, Wo});

    NodePtr xn = input.node();
    return detail::make_result(std::move(out), {xn}, [xn, argmax](Node& self) {
        Tensor& gx = ensure_grad(*xn);
        for (std::size_t i = 0; i < argmax.size(); ++i) {
            gx[argmax[i]] += self.grad[static_cast<std::int64_t>(i)];
        }
    });
}

inline Var reshape(const Var& x, std::vector<std::int64_t> shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    NodePtr xn = x.node();
    return detail::make_result(std::move(out), {xn}, [xn](Node& self) {
        Tensor& gx = ensure_grad(*xn);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
}

// [c,h,w] -> [c, h*w], rows in row-major pixel order.
inline Var flatten(const Var& x) {
    if (x.value().rank() != 3) {
        throw ShapeError("flatten expects [c,h,w], got " + Tensor::shape_str(x.value().shape));
    }
    return reshape(x, {x.value().shape[0], x.value().shape[1] * x.value().shape[2]});
}

inline Var l2_normalize(const Var& x) {
    const double r = x.value().norm2();
    if (r < std::numeric_limits<double>::min()) {
        throw DegenerateInputError("l2_normalize of a zero vector");
    }
    Tensor out = x.value();
    for (double& v : out.data) v /= r;
    NodePtr xn = x.node();
    Tensor y = out;
    return detail::make_result(std::move(out), {xn}, [xn, y, r](Node& self) {
        double dot = 0.0;
        for (std::int64_t i = 0; i < y.size(); ++i) dot += self.grad[i] * y[i];
        Tensor& gx = ensure_grad(*xn);
        for (std::int64_t i = 0; i < y.size(); ++i) gx[i] += (self.grad[i] - y[i] * dot) / r;
    });
}

// ---------------------------------------------------------------------------
// Losses (scalar-valued, shape {1})
// ---------------------------------------------------------------------------

inline Var mse_loss(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mse_loss");
    const std::int64_t n = a.value().size();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = a.value()[i] - b.value()[i];
        acc += d * d;
    }
    Tensor out({1});
    out[0] = acc / static_cast<double>(n);
    NodePtr an = a.node(), bn = b.node();
    return detail::make_result(std::move(out), {an, bn}, [an, bn, n](Node& self) {
        const double g = self.grad[0] * 2.0 / static_cast<double>(n);
        Tensor& ga = ensure_grad(*an);
        Tensor& gb = ensure_grad(*bn);
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = g * (an->value[i] - bn->value[i]);
            ga[i] += d;
            gb[i] -= d;
        }
    });
}

// Mean over the batch of -log softmax(logits)[label]; max-subtraction keeps
// exponentials bounded for logits up to at least 1e6 in magnitude.
inline Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
    const Tensor& lv = logits.value();
    if (lv.rank() != 2) {
        throw ShapeError("cross_entropy expects [N,K] logits, got " + Tensor::shape_str(lv.shape));
    }
    const std::int64_t N = lv.shape[0], K = lv.shape[1];
    if (static_cast<std::int64_t>(labels.size()) != N) {
        throw ShapeError("cross_entropy got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(N) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || y >= K) {
            throw std::out_of_range("cross_entropy label " + std::to_string(y) +
                                    " outside [0," + std::to_string(K) + ")");
        }
    }
    Tensor softmax({N, K});
    double loss = 0.0;
    for (std::int64_t i = 0; i < N; ++i) {
        double mx = lv.at2(i, 0);
        for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, lv.at2(i, k));
        double denom = 0.0;
        for (std::int64_t k = 0; k < K; ++k) denom += std::exp(lv.at2(i, k) - mx);
        for (std::int64_t k = 0; k < K; ++k) softmax.at2(i, k) = std::exp(lv.at2(i, k) - mx) / denom;
        loss += std::log(denom) - (lv.at2(i, labels[static_cast<std::size_t>(i)]) - mx);
    }
    Tensor out({1});
    out[0] = loss / static_cast<double>(N);
    NodePtr ln = logits.node();
    return detail::make_result(std::move(out), {ln}, [ln, softmax, labels, N, K](Node& self) {
        const double g = self.grad[0] / static_cast<double>(N);
        Tensor& gl = ensure_grad(*ln);
        for (std::int64_t i = 0; i < N; ++i) {
            for (std::int64_t k = 0; k < K; ++k) {
                const double onehot = (k == labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
                gl.at2(i, k) += g * (softmax.at2(i, k) - onehot);
            }
        }
    });
}

}  // namespace fpqe::ad
