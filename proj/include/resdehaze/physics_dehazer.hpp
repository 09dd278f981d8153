#pragma once

#include <array>
#include <vector>

#include "resdehaze/graph.hpp"
#include "resdehaze/haze_physics.hpp"
#include "resdehaze/nn.hpp"

namespace resdehaze {

struct PhysicsArch {
  std::array<int, 3> alight_channels{8, 16, 32};  // U-shaped A estimator widths
  int refine_channels = 32;
  int refine_blocks = 4;
};

// Reformulated scattering-model component. The atmospheric light has no direct
// supervision target; it is a U-shaped network pooled to one triple, trained
// only through the transmission calculation and the inversion losses. The
// transmission estimate follows t = 1 - R/(J - A) and is refined additively by
// a residual-block stack conditioned on the hazy input.
template <typename S>
class PhysicsDehazer {
 public:
  PhysicsDehazer(const PhysicsArch& arch, uint64_t seed,
                 const HazePhysicsConfig<S>& phys = {})
      : arch_(arch), phys_(phys), params_("physics") {
    Rng rng(seed);
    const auto [a1, a2, a3] = arch.alight_channels;
    ae1_ = Conv2d<S>(params_, "alight.enc1", 3, a1, rng);
    ap1_ = PReLU<S>(params_, "alight.enc1", a1);
    ae2_ = Conv2d<S>(params_, "alight.enc2", a1, a2, rng, 3, 2, 1);
    ap2_ = PReLU<S>(params_, "alight.enc2", a2);
    ae3_ = Conv2d<S>(params_, "alight.enc3", a2, a3, rng, 3, 2, 1);
    ap3_ = PReLU<S>(params_, "alight.enc3", a3);
    ad2_ = Conv2d<S>(params_, "alight.dec2", a3 + a2, a2, rng);
    aq2_ = PReLU<S>(params_, "alight.dec2", a2);
    ad1_ = Conv2d<S>(params_, "alight.dec1", a2 + a1, a1, rng);
    aq1_ = PReLU<S>(params_, "alight.dec1", a1);
    aout_ = Conv2d<S>(params_, "alight.out", a1, 3, rng);
    params_.register_layer("global_mean_sigmoid:alight");

    const int rc = arch.refine_channels;
    rin_ = Conv2d<S>(params_, "refine.in", 4, rc, rng);
    rp_ = PReLU<S>(params_, "refine.in", rc);
    blocks_.reserve(arch.refine_blocks);
    for (int i = 0; i < arch.refine_blocks; ++i)
      blocks_.emplace_back(params_, "refine.rb" + std::to_string(i + 1), rc, rng);
    rout_ = Conv2d<S>(params_, "refine.out", rc, 1, rng, 3, 1, 1, 0.1);
  }

  ParamSet<S>& params() { return params_; }
  const ParamSet<S>& params() const { return params_; }
  long param_count() const { return params_.scalar_count(); }
  const HazePhysicsConfig<S>& physics_config() const { return phys_; }

  // Global atmospheric light estimate: dense field, global spatial mean,
  // saturating map into (0,1). Returns a (3,1,1) node.
  typename Graph<S>::NodeId estimate_atmospheric_light(Graph<S>& g,
                                                       typename Graph<S>::NodeId I) const {
    auto e1 = ap1_.apply(g, ae1_.apply(g, I));
    auto e2 = ap2_.apply(g, ae2_.apply(g, e1));
    auto e3 = ap3_.apply(g, ae3_.apply(g, e2));
    auto d2 = aq2_.apply(g, ad2_.apply(g, g.concat_c(g.upsample2x(e3), e2)));
    auto d1 = aq1_.apply(g, ad1_.apply(g, g.concat_c(g.upsample2x(d2), e1)));
    auto field = aout_.apply(g, d1);
    return g.sigmoid(g.spatial_mean(field));
  }

  struct StageVals {
    typename Graph<S>::NodeId a_hat;     // (3,1,1)
    typename Graph<S>::NodeId t_hat;     // (1,H,W)
    typename Graph<S>::NodeId t_refine;  // (1,H,W)
    typename Graph<S>::NodeId j_prelim;  // (3,H,W)
    typename Graph<S>::NodeId j_refine;  // (3,H,W)
  };

  StageVals forward(Graph<S>& g, typename Graph<S>::NodeId I,
                    typename Graph<S>::NodeId j_hat,
                    typename Graph<S>::NodeId r_hat) const {
    require(g.value(I).same_shape(g.value(j_hat)) &&
                g.value(I).same_shape(g.value(r_hat)),
            "physics forward: input shapes disagree");
    StageVals sv;
    sv.a_hat = estimate_atmospheric_light(g, I);
    sv.t_hat = transmission_from_residual_g(g, r_hat, j_hat, sv.a_hat, phys_);
    auto x = rp_.apply(g, rin_.apply(g, g.concat_c(sv.t_hat, I)));
    for (const auto& b : blocks_) x = b.apply(g, x);
    auto delta = rout_.apply(g, x);
    sv.t_refine = g.clamp(g.add(sv.t_hat, delta), phys_.t_min, S(1));
    sv.j_prelim = invert_scattering_g(g, I, sv.t_hat, sv.a_hat);
    sv.j_refine = invert_scattering_g(g, I, sv.t_refine, sv.a_hat);
    return sv;
  }

 private:
  PhysicsArch arch_;
  HazePhysicsConfig<S> phys_;
  ParamSet<S> params_;
  Conv2d<S> ae1_, ae2_, ae3_, ad2_, ad1_, aout_;
  PReLU<S> ap1_, ap2_, ap3_, aq2_, aq1_;
  Conv2d<S> rin_, rout_;
  PReLU<S> rp_;
  std::vector<ResBlock<S>> blocks_;
};

// Plain-tensor snapshot of the five stage outputs.
template <typename S>
struct StageOutputs {
  Atmosphere<S> a_hat;
  TransmissionMap<S> t_hat;
  TransmissionMap<S> t_refine;
  Image<S> j_prelim;
  Image<S> j_refine;
};

template <typename S>
StageOutputs<S> run_physics(const PhysicsDehazer<S>& pd, const Image<S>& I,
                            const Image<S>& j_hat, const ResidualMap<S>& r_hat) {
  Graph<S> g;
  auto sv = pd.forward(g, g.leaf(I), g.leaf(j_hat), g.leaf(r_hat));
  StageOutputs<S> out;
  const auto& a = g.value(sv.a_hat);
  out.a_hat = Atmosphere<S>(a[0], a[1], a[2]);
  out.t_hat = g.value(sv.t_hat);
  out.t_refine = g.value(sv.t_refine);
  out.j_prelim = g.value(sv.j_prelim);
  out.j_refine = g.value(sv.j_refine);
  return out;
}

}  // namespace resdehaze
