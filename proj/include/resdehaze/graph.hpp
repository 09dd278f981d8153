#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "resdehaze/tensor.hpp"

namespace resdehaze {

// Reverse-mode tape over Tensor<S>. Nodes are appended in evaluation order,
// which is already a topological order, so backward() is a single reverse
// sweep. One Graph serves one forward/backward pass and is confined to one
// thread; parameter gradients leave the tape through export_grads().
template <typename S>
class Graph {
 public:
  using NodeId = int;
  using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  struct Node {
    Tensor<S> val;
    Tensor<S> grad;  // allocated on first touch during backward
    std::function<void(Graph&)> back;
  };

  const Tensor<S>& value(NodeId id) const { return nodes_[id].val; }
  const Tensor<S>& grad(NodeId id) const { return nodes_[id].grad; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

  void clear() {
    nodes_.clear();
    shared_.clear();
    sinks_.clear();
  }

  // ---- leaves -------------------------------------------------------------

  NodeId leaf(Tensor<S> t) { return push(std::move(t), nullptr); }

  // Leaf whose gradient is exported into *sink by export_grads().
  NodeId input(const Tensor<S>& t, Tensor<S>* sink) {
    NodeId id = push(Tensor<S>(t), nullptr);
    if (sink) sinks_.push_back({id, sink});
    return id;
  }

  // As input(), but repeated calls with the same sink return the same node, so
  // a weight reused across recurrent iterations accumulates one gradient.
  NodeId shared_input(const Tensor<S>& t, Tensor<S>* sink) {
    if (!sink) return leaf(Tensor<S>(t));
    auto it = shared_.find(sink);
    if (it != shared_.end()) return it->second;
    NodeId id = input(t, sink);
    shared_[sink] = id;
    return id;
  }

  NodeId detach(NodeId x) { return push(Tensor<S>(value(x)), nullptr); }

  // ---- elementwise --------------------------------------------------------

  NodeId add(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "graph add");
    Tensor<S> out(value(a).shape(), value(a).array() + value(b).array());
    return push(std::move(out), [a, b](Graph& g) {
      g.accumulate(a, g.grad_of());
      g.accumulate(b, g.grad_of());
    });
  }

  NodeId sub(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "graph sub");
    Tensor<S> out(value(a).shape(), value(a).array() - value(b).array());
    return push(std::move(out), [a, b](Graph& g) {
      g.accumulate(a, g.grad_of());
      g.accumulate(b, -g.grad_of());
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "graph mul");
    Tensor<S> out(value(a).shape(), value(a).array() * value(b).array());
    return push(std::move(out), [a, b](Graph& g) {
      g.accumulate(a, g.grad_of() * g.value(b).array());
      g.accumulate(b, g.grad_of() * g.value(a).array());
    });
  }

  NodeId div(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "graph div");
    Tensor<S> out(value(a).shape(), value(a).array() / value(b).array());
    return push(std::move(out), [a, b](Graph& g) {
      const auto& bv = g.value(b).array();
      g.accumulate(a, g.grad_of() / bv);
      g.accumulate(b, -g.grad_of() * g.value(a).array() / (bv * bv));
    });
  }

  // a*x + b with scalar coefficients.
  NodeId affine(NodeId x, S a, S b) {
    Tensor<S> out(value(x).shape(), a * value(x).array() + b);
    return push(std::move(out), [x, a](Graph& g) { g.accumulate(x, a * g.grad_of()); });
  }

  NodeId scale(NodeId x, S a) { return affine(x, a, S(0)); }

  NodeId square(NodeId x) {
    Tensor<S> out(value(x).shape(), value(x).array().square());
    return push(std::move(out), [x](Graph& g) {
      g.accumulate(x, S(2) * g.grad_of() * g.value(x).array());
    });
  }

  NodeId abs_of(NodeId x) {
    Tensor<S> out(value(x).shape(), value(x).array().abs());
    return push(std::move(out), [x](Graph& g) {
      g.accumulate(x, g.grad_of() * g.value(x).array().sign());
    });
  }

  NodeId log_of(NodeId x) {
    Tensor<S> out(value(x).shape(), value(x).array().log());
    return push(std::move(out), [x](Graph& g) {
      g.accumulate(x, g.grad_of() / g.value(x).array());
    });
  }

  NodeId sigmoid(NodeId x) {
    Tensor<S> out(value(x).shape(),
                  (S(1) / (S(1) + (-value(x).array()).exp())));
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
      const auto& y = g.value(id).array();
      g.accumulate(x, g.grad_of() * y * (S(1) - y));
    };
    return id;
  }

  NodeId tanh_of(NodeId x) {
    Tensor<S> out(value(x).shape(), value(x).array().tanh());
    NodeId id = push(std::move(out), nullptr);
    nodes_[id].back = [x, id](Graph& g) {
      const auto& y = g.value(id).array();
      g.accumulate(x, g.grad_of() * (S(1) - y * y));
    };
    return id;
  }

  // Hard clamp; subgradient 1 strictly inside (lo, hi), 0 elsewhere.
  NodeId clamp(NodeId x, S lo, S hi) {
    Tensor<S> out(value(x).shape(), value(x).array().max(lo).min(hi));
    return push(std::move(out), [x, lo, hi](Graph& g) {
      const auto& v = g.value(x).array();
      auto inside = (v > lo && v < hi).template cast<S>();
      g.accumulate(x, g.grad_of() * inside);
    });
  }

  // Sign-preserving magnitude floor: |y| >= eps, sign kept (sign(0) -> +).
  // Derivative is 1 where |x| >= eps and 0 in the floored region.
  NodeId guard_magnitude(NodeId x, S eps) {
    const auto& v = value(x).array();
    ArrayX<S> y(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      S d = v[i];
      if (d >= eps || d <= -eps) y[i] = d;
      else y[i] = (d >= S(0)) ? eps : -eps;
    }
    Tensor<S> out(value(x).shape(), std::move(y));
    return push(std::move(out), [x, eps](Graph& g) {
      const auto& v2 = g.value(x).array();
      auto pass = (v2.abs() >= eps).template cast<S>();
      g.accumulate(x, g.grad_of() * pass);
    });
  }

  // Per-channel parametric rectifier: y = x > 0 ? x : alpha_c * x.
  NodeId prelu(NodeId x, NodeId alpha) {
    const Tensor<S>& xv = value(x);
    const Tensor<S>& av = value(alpha);
    require(av.c() == xv.c() && av.h() == 1 && av.w() == 1,
            "prelu: alpha must be (c,1,1) matching input channels");
    Tensor<S> out(xv.shape(), ArrayX<S>(xv.size()));
    for (int ci = 0; ci < xv.c(); ++ci)
      out.plane(ci) = (xv.plane(ci) > S(0)).select(xv.plane(ci), av[ci] * xv.plane(ci));
    return push(std::move(out), [x, alpha](Graph& g) {
      const Tensor<S>& xv2 = g.value(x);
      const Tensor<S>& av2 = g.value(alpha);
      Tensor<S>& dx = g.ensure_grad(x);
      Tensor<S>& da = g.ensure_grad(alpha);
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      for (int ci = 0; ci < xv2.c(); ++ci) {
        auto neg = (xv2.plane(ci) <= S(0)).template cast<S>();
        dx.plane(ci) += dy.plane(ci) * (S(1) - neg + neg * av2[ci]);
        da[ci] += (dy.plane(ci) * neg * xv2.plane(ci)).sum();
      }
    });
  }

  // ---- shape ops ----------------------------------------------------------

  NodeId concat_c(NodeId a, NodeId b) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    require(av.h() == bv.h() && av.w() == bv.w(), "concat_c: spatial dims differ");
    Tensor<S> out(av.c() + bv.c(), av.h(), av.w());
    out.array().head(av.size()) = av.array();
    out.array().tail(bv.size()) = bv.array();
    return push(std::move(out), [a, b](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      int na = g.value(a).size();
      g.ensure_grad(a).array() += dy.array().head(na);
      g.ensure_grad(b).array() += dy.array().tail(g.value(b).size());
    });
  }

  NodeId slice_c(NodeId x, int c0, int n) {
    const Tensor<S>& xv = value(x);
    require(c0 >= 0 && c0 + n <= xv.c(), "slice_c: channel range out of bounds");
    Tensor<S> out(n, xv.h(), xv.w());
    int ps = xv.plane_size();
    out.array() = xv.array().segment(c0 * ps, n * ps);
    return push(std::move(out), [x, c0, n](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      int ps2 = g.value(x).plane_size();
      g.ensure_grad(x).array().segment(c0 * ps2, n * ps2) += dy.array();
    });
  }

  NodeId repeat_c(NodeId x, int n) {
    const Tensor<S>& xv = value(x);
    require(xv.c() == 1, "repeat_c expects a single-channel input");
    Tensor<S> out(n, xv.h(), xv.w());
    for (int ci = 0; ci < n; ++ci) out.plane(ci) = xv.plane(0);
    return push(std::move(out), [x, n](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      auto dst = g.ensure_grad(x).plane(0);
      for (int ci = 0; ci < n; ++ci) dst += dy.plane(ci);
    });
  }

  // (c,1,1) -> (c,h,w)
  NodeId broadcast_spatial(NodeId x, int h, int w) {
    const Tensor<S>& xv = value(x);
    require(xv.h() == 1 && xv.w() == 1, "broadcast_spatial expects (c,1,1)");
    Tensor<S> out(xv.c(), h, w);
    for (int ci = 0; ci < xv.c(); ++ci) out.plane(ci).setConstant(xv[ci]);
    return push(std::move(out), [x](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      Tensor<S>& dx = g.ensure_grad(x);
      for (int ci = 0; ci < dy.c(); ++ci) dx[ci] += dy.plane(ci).sum();
    });
  }

  NodeId upsample2x(NodeId x) {
    const Tensor<S>& xv = value(x);
    Tensor<S> out(xv.c(), xv.h() * 2, xv.w() * 2);
    for (int ci = 0; ci < xv.c(); ++ci)
      for (int y = 0; y < out.h(); ++y)
        for (int xx = 0; xx < out.w(); ++xx)
          out(ci, y, xx) = xv(ci, y / 2, xx / 2);
    return push(std::move(out), [x](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      Tensor<S>& dx = g.ensure_grad(x);
      for (int ci = 0; ci < dx.c(); ++ci)
        for (int y = 0; y < dy.h(); ++y)
          for (int xx = 0; xx < dy.w(); ++xx)
            dx(ci, y / 2, xx / 2) += dy(ci, y, xx);
    });
  }

  // ---- reductions ---------------------------------------------------------

  NodeId mean_all(NodeId x) {
    Tensor<S> out(1, 1, 1);
    out[0] = value(x).array().mean();
    return push(std::move(out), [x](Graph& g) {
      S d = g.grad_of()[0] / static_cast<S>(g.value(x).size());
      g.ensure_grad(x).array() += d;
    });
  }

  NodeId channel_mean(NodeId x) {
    const Tensor<S>& xv = value(x);
    Tensor<S> out(1, xv.h(), xv.w());
    auto dst = out.plane(0);
    dst.setZero();
    for (int ci = 0; ci < xv.c(); ++ci) dst += xv.plane(ci);
    dst /= static_cast<S>(xv.c());
    return push(std::move(out), [x](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      Tensor<S>& dx = g.ensure_grad(x);
      S inv = S(1) / static_cast<S>(dx.c());
      for (int ci = 0; ci < dx.c(); ++ci) dx.plane(ci) += inv * dy.plane(0);
    });
  }

  NodeId spatial_mean(NodeId x) {
    const Tensor<S>& xv = value(x);
    Tensor<S> out(xv.c(), 1, 1);
    for (int ci = 0; ci < xv.c(); ++ci) out[ci] = xv.plane(ci).mean();
    return push(std::move(out), [x](Graph& g) {
      const Tensor<S>& dy = g.nodes_[g.current_].grad;
      Tensor<S>& dx = g.ensure_grad(x);
      S inv = S(1) / static_cast<S>(dx.plane_size());
      for (int ci = 0; ci < dx.c(); ++ci) dx.plane(ci) += inv * dy[ci];
    });
  }

  // ---- convolution ----------------------------------------------------------
  // Weights flattened (out_c, in_c*k*k, 1); bias (out_c,1,1). Same-padding `pad`,
  // square kernel, no dilation. im2col + GEMM; the column matrix is rebuilt in
  // the backward pass instead of retained (GEMM dominates, memory does not).

  NodeId conv2d(NodeId x, NodeId w, NodeId b, int k, int stride, int pad) {
    const Tensor<S>& xv = value(x);
    const Tensor<S>& wv = value(w);
    const Tensor<S>& bv = value(b);
    const int in_c = xv.c();
    const int out_c = wv.c();
    require(wv.h() == in_c * k * k && wv.w() == 1,
            "conv2d: weight shape " + wv.shape().str() + " does not match input " +
                xv.shape().str() + " with k=" + std::to_string(k));
    require(bv.c() == out_c && bv.h() == 1 && bv.w() == 1, "conv2d: bad bias shape");
    const int oh = (xv.h() + 2 * pad - k) / stride + 1;
    const int ow = (xv.w() + 2 * pad - k) / stride + 1;
    require(oh > 0 && ow > 0, "conv2d: output would be empty");

    RowMatrix col;
    im2col(xv, k, stride, pad, oh, ow, col);
    Eigen::Map<const RowMatrix> W(wv.data(), out_c, in_c * k * k);
    Tensor<S> out(out_c, oh, ow);
    Eigen::Map<RowMatrix> O(out.data(), out_c, oh * ow);
    O.noalias() = W * col;
    for (int oc = 0; oc < out_c; ++oc) out.plane(oc) += bv[oc];

    return push(std::move(out), [x, w, b, k, stride, pad, oh, ow](Graph& g) {
      const Tensor<S>& xv2 = g.value(x);
      const Tensor<S>& wv2 = g.value(w);
      const Tensor<S>& dyT = g.nodes_[g.current_].grad;
      const int in_c2 = xv2.c();
      const int out_c2 = wv2.c();
      Eigen::Map<const RowMatrix> dY(dyT.data(), out_c2, oh * ow);

      // bias grad
      Tensor<S>& db = g.ensure_grad(b);
      for (int oc = 0; oc < out_c2; ++oc) db[oc] += dyT.plane(oc).sum();

      // weight grad: dW = dY * col^T
      RowMatrix col;
      g.im2col(xv2, k, stride, pad, oh, ow, col);
      Tensor<S>& dw = g.ensure_grad(w);
      Eigen::Map<RowMatrix> dW(dw.data(), out_c2, in_c2 * k * k);
      dW.noalias() += dY * col.transpose();

      // input grad: col2im(W^T * dY)
      Eigen::Map<const RowMatrix> W2(wv2.data(), out_c2, in_c2 * k * k);
      RowMatrix dcol(in_c2 * k * k, oh * ow);
      dcol.noalias() = W2.transpose() * dY;
      g.col2im(dcol, k, stride, pad, oh, ow, g.ensure_grad(x));
    });
  }

  // ---- engine ---------------------------------------------------------------

  void backward(NodeId root) {
    require(value(root).size() == 1, "backward: root must be scalar");
    ensure_grad(root).array().setConstant(S(1));
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.grad.size() > 0) {
        current_ = i;
        n.back(*this);
      }
    }
  }

  // Adds accumulated leaf gradients into their sinks; call once per sample, in
  // sample order, for deterministic batch reduction.
  void export_grads(S scl = S(1)) {
    for (auto& [id, sink] : sinks_) {
      if (nodes_[id].grad.size() == 0) continue;
      sink->array() += scl * nodes_[id].grad.array();
    }
  }

  Tensor<S>& ensure_grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      const Shape& s = n.val.shape();
      n.grad = Tensor<S>(s.c, s.h, s.w);
    }
    return n.grad;
  }

 private:
  // grad of the node whose back() is currently running
  const ArrayX<S>& grad_of() const { return nodes_[current_].grad.array(); }

  template <typename Expr>
  void accumulate(NodeId id, const Expr& e) {
    ensure_grad(id).array() += e;
  }

  NodeId push(Tensor<S> val, std::function<void(Graph&)> back) {
    nodes_.push_back(Node{std::move(val), Tensor<S>(), std::move(back)});
    return static_cast<NodeId>(nodes_.size()) - 1;
  }

  void im2col(const Tensor<S>& x, int k, int stride, int pad, int oh, int ow,
              RowMatrix& col) const {
    const int in_c = x.c(), h = x.h(), w = x.w();
    col.resize(in_c * k * k, oh * ow);
    for (int ci = 0; ci < in_c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          S* dst = col.data() + static_cast<size_t>((ci * k + ky) * k + kx) * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int y = oy * stride - pad + ky;
            if (y < 0 || y >= h) {
              for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = S(0);
              continue;
            }
            const S* src = x.data() + (ci * h + y) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int xx = ox * stride - pad + kx;
              dst[oy * ow + ox] = (xx >= 0 && xx < w) ? src[xx] : S(0);
            }
          }
        }
      }
    }
  }

  void col2im(const RowMatrix& dcol, int k, int stride, int pad, int oh, int ow,
              Tensor<S>& dx) const {
    const int in_c = dx.c(), h = dx.h(), w = dx.w();
    for (int ci = 0; ci < in_c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const S* src = dcol.data() + static_cast<size_t>((ci * k + ky) * k + kx) * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int y = oy * stride - pad + ky;
            if (y < 0 || y >= h) continue;
            S* dst = dx.data() + (ci * h + y) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int xx = ox * stride - pad + kx;
              if (xx >= 0 && xx < w) dst[xx] += src[oy * ow + ox];
            }
          }
        }
      }
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<const void*, NodeId> shared_;
  std::vector<std::pair<NodeId, Tensor<S>*>> sinks_;
  NodeId current_ = -1;
};

}  // namespace resdehaze
