#pragma once

#include <string>
#include <vector>

#include "resdehaze/graph.hpp"
#include "resdehaze/nn.hpp"
#include "resdehaze/tensor.hpp"

namespace resdehaze {

struct DehazerArch {
  int c1 = 16, c2 = 32, c3 = 64;  // encoder widths; c3 is the memory-gate width
  int fr_channels = 16;           // residual-function stack width
};

// All-zero initial residual map.
template <typename S>
Tensor<S> init_residual(int h, int w) {
  require(h > 0 && w > 0, "init_residual: invalid shape");
  return Tensor<S>(3, h, w);
}

// Recurrent physical-model-free component. One encoder-decoder G (shared
// across iterations) maps concat(hazy input, previous residual estimate) to a
// dehazed estimate; a 4-layer convolutional stack f_R maps (dehazed - hazy)
// back to a residual estimate. A convolutional memory gate at the bottleneck
// carries state between iterations. No normalization layers anywhere.
template <typename S>
class Dehazer {
 public:
  Dehazer(const DehazerArch& arch, uint64_t seed) : arch_(arch), params_("dehazer") {
    Rng rng(seed);
    const int c1 = arch.c1, c2 = arch.c2, c3 = arch.c3, fr = arch.fr_channels;
    enc1_ = Conv2d<S>(params_, "g.enc1", 6, c1, rng);
    p1_ = PReLU<S>(params_, "g.enc1", c1);
    enc2_ = Conv2d<S>(params_, "g.enc2", c1, c2, rng, 3, 2, 1);
    p2_ = PReLU<S>(params_, "g.enc2", c2);
    enc3_ = Conv2d<S>(params_, "g.enc3", c2, c3, rng, 3, 2, 1);
    p3_ = PReLU<S>(params_, "g.enc3", c3);
    lstm_ = ConvLstmCell<S>(params_, "g.lstm", c3, rng);
    dec2_ = Conv2d<S>(params_, "g.dec2", c3 + c2, c2, rng);
    q2_ = PReLU<S>(params_, "g.dec2", c2);
    dec1_ = Conv2d<S>(params_, "g.dec1", c2 + c1, c1, rng);
    q1_ = PReLU<S>(params_, "g.dec1", c1);
    out_ = Conv2d<S>(params_, "g.out", c1, 3, rng);
    params_.register_layer("sigmoid:g.out");

    fr1_ = Conv2d<S>(params_, "fr.c1", 3, fr, rng);
    fp1_ = PReLU<S>(params_, "fr.c1", fr);
    fr2_ = Conv2d<S>(params_, "fr.c2", fr, fr, rng);
    fp2_ = PReLU<S>(params_, "fr.c2", fr);
    fr3_ = Conv2d<S>(params_, "fr.c3", fr, fr, rng);
    fp3_ = PReLU<S>(params_, "fr.c3", fr);
    fr4_ = Conv2d<S>(params_, "fr.c4", fr, 3, rng);
    params_.register_layer("tanh:fr.c4");
  }

  ParamSet<S>& params() { return params_; }
  const ParamSet<S>& params() const { return params_; }
  long param_count() const { return params_.scalar_count(); }
  const DehazerArch& arch() const { return arch_; }

  // Downsampling factor between input and the memory-gate state.
  static constexpr int kStateStride = 4;

  struct StepVals {
    typename Graph<S>::NodeId j_hat;  // (3,H,W), sigmoid-saturated
    typename Graph<S>::NodeId r_hat;  // (3,H,W), tanh-saturated
    typename ConvLstmCell<S>::State state;
  };

  typename ConvLstmCell<S>::State zero_state(Graph<S>& g, int h, int w) const {
    require(h % kStateStride == 0 && w % kStateStride == 0,
            "dehazer: input dims must be multiples of " + std::to_string(kStateStride));
    return lstm_.zero_state(g, h / kStateStride, w / kStateStride);
  }

  StepVals step(Graph<S>& g, typename Graph<S>::NodeId I,
                typename Graph<S>::NodeId r_prev,
                typename ConvLstmCell<S>::State state) const {
    const auto& Iv = g.value(I);
    require(g.value(r_prev).same_shape(Iv), "dehazer step: residual/input shape mismatch");
    auto x = g.concat_c(I, r_prev);
    auto e1 = p1_.apply(g, enc1_.apply(g, x));
    auto e2 = p2_.apply(g, enc2_.apply(g, e1));
    auto e3 = p3_.apply(g, enc3_.apply(g, e2));
    auto s = lstm_.apply(g, e3, state);
    auto d2 = q2_.apply(g, dec2_.apply(g, g.concat_c(g.upsample2x(s.h), e2)));
    auto d1 = q1_.apply(g, dec1_.apply(g, g.concat_c(g.upsample2x(d2), e1)));
    auto j_hat = g.sigmoid(out_.apply(g, d1));
    auto diff = g.sub(I, j_hat);
    auto r = fp1_.apply(g, fr1_.apply(g, diff));
    r = fp2_.apply(g, fr2_.apply(g, r));
    r = fp3_.apply(g, fr3_.apply(g, r));
    auto r_hat = g.tanh_of(fr4_.apply(g, r));
    return {j_hat, r_hat, s};
  }

  struct TraceVals {
    std::vector<typename Graph<S>::NodeId> j;  // k = 1..K
    std::vector<typename Graph<S>::NodeId> r;
  };

  // K iterations from a zero residual map and zero memory state.
  TraceVals run(Graph<S>& g, typename Graph<S>::NodeId I, int K) const {
    require(K >= 1, "dehazer run: K must be >= 1");
    const auto& Iv = g.value(I);
    TraceVals tr;
    auto state = zero_state(g, Iv.h(), Iv.w());
    auto r_prev = g.leaf(init_residual<S>(Iv.h(), Iv.w()));
    for (int k = 0; k < K; ++k) {
      auto sv = step(g, I, r_prev, state);
      tr.j.push_back(sv.j_hat);
      tr.r.push_back(sv.r_hat);
      state = sv.state;
      r_prev = sv.r_hat;
    }
    return tr;
  }

 private:
  DehazerArch arch_;
  ParamSet<S> params_;
  Conv2d<S> enc1_, enc2_, enc3_, dec2_, dec1_, out_;
  PReLU<S> p1_, p2_, p3_, q2_, q1_;
  ConvLstmCell<S> lstm_;
  Conv2d<S> fr1_, fr2_, fr3_, fr4_;
  PReLU<S> fp1_, fp2_, fp3_;
};

// Plain-tensor iteration trace for inference paths.
template <typename S>
struct IterationTrace {
  std::vector<Tensor<S>> j_hat;
  std::vector<Tensor<S>> r_hat;
};

template <typename S>
IterationTrace<S> run_dehazer(const Dehazer<S>& d, const Tensor<S>& I, int K) {
  Graph<S> g;
  auto In = g.leaf(I);
  auto tr = d.run(g, In, K);
  IterationTrace<S> out;
  for (int k = 0; k < K; ++k) {
    out.j_hat.push_back(g.value(tr.j[k]));
    out.r_hat.push_back(g.value(tr.r[k]));
  }
  return out;
}

}  // namespace resdehaze
