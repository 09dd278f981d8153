#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "resdehaze/graph.hpp"
#include "resdehaze/rng.hpp"
#include "resdehaze/tensor.hpp"

namespace resdehaze {

template <typename S>
struct ParamTensor {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  Tensor<S> m, v;  // adaptive-moment state
  bool trainable = true;
};

// Named parameter collection. Registry order is construction order and is the
// serialization order; layer kinds are recorded for introspection.
template <typename S>
class ParamSet {
 public:
  explicit ParamSet(std::string group) : group_(std::move(group)) {}
  ParamSet(const ParamSet&) = delete;             // layers hold stable pointers
  ParamSet& operator=(const ParamSet&) = delete;

  ParamTensor<S>& add(const std::string& name, int c, int h, int w) {
    items_.push_back(std::make_unique<ParamTensor<S>>());
    ParamTensor<S>& p = *items_.back();
    p.name = group_ + "." + name;
    p.value = Tensor<S>(c, h, w);
    p.grad = Tensor<S>(c, h, w);
    p.m = Tensor<S>(c, h, w);
    p.v = Tensor<S>(c, h, w);
    return p;
  }

  void register_layer(const std::string& kind) { layer_kinds_.push_back(kind); }
  const std::vector<std::string>& layer_kinds() const { return layer_kinds_; }

  const std::string& group() const { return group_; }
  size_t size() const { return items_.size(); }
  ParamTensor<S>& operator[](size_t i) { return *items_[i]; }
  const ParamTensor<S>& operator[](size_t i) const { return *items_[i]; }

  long scalar_count() const {
    long n = 0;
    for (const auto& p : items_) n += p->value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : items_) p->grad.array().setZero();
  }

  bool all_finite() const {
    for (const auto& p : items_)
      if (!p->value.all_finite()) return false;
    return true;
  }

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : items_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : items_) f(*p);
  }

 private:
  std::string group_;
  std::vector<std::unique_ptr<ParamTensor<S>>> items_;
  std::vector<std::string> layer_kinds_;
};

// He-style normal init for a conv feeding a rectifier; gain scales the spread.
template <typename S>
void init_conv(ParamTensor<S>& w, ParamTensor<S>& b, int fan_in, Rng& rng, double gain = 1.0) {
  const double sd = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int i = 0; i < w.value.size(); ++i) w.value[i] = static_cast<S>(sd * rng.normal());
  b.value.array().setZero();
}

// ---- layers ----------------------------------------------------------------

template <typename S>
struct Conv2d {
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  ParamTensor<S>* w = nullptr;
  ParamTensor<S>* b = nullptr;

  Conv2d() = default;
  Conv2d(ParamSet<S>& ps, const std::string& name, int in_c_, int out_c_, Rng& rng,
         int k_ = 3, int stride_ = 1, int pad_ = 1, double gain = 1.0)
      : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
    w = &ps.add(name + ".w", out_c, in_c * k * k, 1);
    b = &ps.add(name + ".b", out_c, 1, 1);
    init_conv(*w, *b, in_c * k * k, rng, gain);
    ps.register_layer("conv2d:" + name);
  }

  typename Graph<S>::NodeId apply(Graph<S>& g, typename Graph<S>::NodeId x) const {
    auto wv = g.shared_input(w->value, &w->grad);
    auto bv = g.shared_input(b->value, &b->grad);
    return g.conv2d(x, wv, bv, k, stride, pad);
  }
};

template <typename S>
struct PReLU {
  ParamTensor<S>* a = nullptr;

  PReLU() = default;
  PReLU(ParamSet<S>& ps, const std::string& name, int channels, S init = S(0.25)) {
    a = &ps.add(name + ".a", channels, 1, 1);
    a->value.array().setConstant(init);
    ps.register_layer("prelu:" + name);
  }

  typename Graph<S>::NodeId apply(Graph<S>& g, typename Graph<S>::NodeId x) const {
    return g.prelu(x, g.shared_input(a->value, &a->grad));
  }
};

// Convolutional memory gate at an encoder-decoder bottleneck. One 3x3
// convolution over concat(x, h) produces the input/forget/output gates and the
// candidate cell update.
template <typename S>
struct ConvLstmCell {
  int channels = 0;
  Conv2d<S> gates;

  ConvLstmCell() = default;
  ConvLstmCell(ParamSet<S>& ps, const std::string& name, int channels_, Rng& rng)
      : channels(channels_),
        gates(ps, name + ".gates", 2 * channels_, 4 * channels_, rng) {
    // bias layout: [i | f | o | g]; forget gate starts open
    for (int i = channels; i < 2 * channels; ++i) gates.b->value[i] = S(1);
    ps.register_layer("conv_lstm:" + name);
  }

  struct State {
    typename Graph<S>::NodeId h, c;
  };

  State zero_state(Graph<S>& g, int height, int width) const {
    return {g.leaf(Tensor<S>(channels, height, width)),
            g.leaf(Tensor<S>(channels, height, width))};
  }

  State apply(Graph<S>& g, typename Graph<S>::NodeId x, State s) const {
    auto z = gates.apply(g, g.concat_c(x, s.h));
    auto i = g.sigmoid(g.slice_c(z, 0, channels));
    auto f = g.sigmoid(g.slice_c(z, channels, channels));
    auto o = g.sigmoid(g.slice_c(z, 2 * channels, channels));
    auto cand = g.tanh_of(g.slice_c(z, 3 * channels, channels));
    auto c_next = g.add(g.mul(f, s.c), g.mul(i, cand));
    auto h_next = g.mul(o, g.tanh_of(c_next));
    return {h_next, c_next};
  }
};

// conv-prelu-conv with identity skip (no post-activation).
template <typename S>
struct ResBlock {
  Conv2d<S> c1, c2;
  PReLU<S> act;

  ResBlock() = default;
  ResBlock(ParamSet<S>& ps, const std::string& name, int channels, Rng& rng)
      : c1(ps, name + ".c1", channels, channels, rng),
        c2(ps, name + ".c2", channels, channels, rng),
        act(ps, name + ".act", channels) {
    ps.register_layer("resblock:" + name);
  }

  typename Graph<S>::NodeId apply(Graph<S>& g, typename Graph<S>::NodeId x) const {
    return g.add(x, c2.apply(g, act.apply(g, c1.apply(g, x))));
  }
};

// ---- optimizer ---------------------------------------------------------------

template <typename S>
class AdamOptimizer {
 public:
  AdamOptimizer(S lr, S beta1, S beta2, S eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void attach(ParamSet<S>& ps) {
    ps.for_each([this](ParamTensor<S>& p) {
      if (p.trainable) params_.push_back(&p);
    });
  }

  void step() {
    ++t_;
    const S c1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1_), t_));
    const S c2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2_), t_));
    for (ParamTensor<S>* p : params_) {
      p->m.array() = b1_ * p->m.array() + (S(1) - b1_) * p->grad.array();
      p->v.array() = b2_ * p->v.array() + (S(1) - b2_) * p->grad.array().square();
      p->value.array() -=
          lr_ * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + eps_);
    }
  }

  void zero_grads() {
    for (ParamTensor<S>* p : params_) p->grad.array().setZero();
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }

 private:
  S lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<ParamTensor<S>*> params_;
};

}  // namespace resdehaze
