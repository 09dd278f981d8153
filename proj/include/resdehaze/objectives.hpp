#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resdehaze/graph.hpp"
#include "resdehaze/model_free_dehazer.hpp"
#include "resdehaze/nn.hpp"
#include "resdehaze/physics_dehazer.hpp"

namespace resdehaze {

enum class PixelNorm { kAbsolute, kSquared };

inline const char* to_string(PixelNorm n) {
  return n == PixelNorm::kAbsolute ? "absolute-error" : "squared-error";
}

template <typename S>
struct LossWeights {
  S a1 = S(1.0);    // pixel reconstruction per iteration
  S a2 = S(0.05);   // perceptual
  S a3 = S(0.005);  // adversarial (generator side)
  S a4 = S(0.5);    // residual vs ground truth J - I
  S a5 = S(0.5);    // residual vs own estimate J_hat_k - I
  PixelNorm pixel_norm = PixelNorm::kAbsolute;

  void validate() const {
    require(a1 >= S(0) && a2 >= S(0) && a3 >= S(0) && a4 >= S(0) && a5 >= S(0),
            "loss weights must be nonnegative");
    require(a1 + a2 + a3 + a4 + a5 > S(0), "at least one loss weight must be positive");
  }
};

// Ordered scalar map; column order is append order and is stable for a given
// configuration, so it serializes directly into CSV rows.
class LossReport {
 public:
  void set(const std::string& name, double v) {
    for (auto& e : entries_)
      if (e.first == name) {
        e.second = v;
        return;
      }
    entries_.emplace_back(name, v);
  }
  double get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return e.second;
    fail("loss report: no entry '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return true;
    return false;
  }
  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

  // Returns the name of the first non-finite entry, or empty.
  std::string first_non_finite() const {
    for (const auto& e : entries_)
      if (!std::isfinite(e.second)) return e.first;
    return {};
  }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

// ---- pixel loss --------------------------------------------------------------

template <typename S>
S pixel_loss(const Tensor<S>& x, const Tensor<S>& y, PixelNorm norm) {
  require_same_shape(x, y, "pixel_loss");
  if (norm == PixelNorm::kAbsolute) return (x.array() - y.array()).abs().mean();
  return (x.array() - y.array()).square().mean();
}

template <typename S>
typename Graph<S>::NodeId pixel_loss_g(Graph<S>& g, typename Graph<S>::NodeId x,
                                       typename Graph<S>::NodeId y, PixelNorm norm) {
  auto d = g.sub(x, y);
  return g.mean_all(norm == PixelNorm::kAbsolute ? g.abs_of(d) : g.square(d));
}

// ---- perceptual loss -----------------------------------------------------------

// Fixed, seeded, frozen 3-scale convolutional feature extractor. Stands in for
// pretrained classification features; compares structure at three resolutions.
template <typename S>
class PerceptualExtractor {
 public:
  explicit PerceptualExtractor(uint64_t seed, std::array<int, 3> channels = {8, 16, 32})
      : params_("perceptual") {
    Rng rng(seed);
    c1_ = Conv2d<S>(params_, "s1", 3, channels[0], rng, 3, 2, 1);
    c2_ = Conv2d<S>(params_, "s2", channels[0], channels[1], rng, 3, 2, 1);
    c3_ = Conv2d<S>(params_, "s3", channels[1], channels[2], rng, 3, 2, 1);
    params_.for_each([](ParamTensor<S>& p) { p.trainable = false; });
  }

  ParamSet<S>& params() { return params_; }
  const ParamSet<S>& params() const { return params_; }

  std::array<typename Graph<S>::NodeId, 3> features(Graph<S>& g,
                                                    typename Graph<S>::NodeId x) const {
    auto f1 = g.tanh_of(c1_.apply(g, x));
    auto f2 = g.tanh_of(c2_.apply(g, f1));
    auto f3 = g.tanh_of(c3_.apply(g, f2));
    return {f1, f2, f3};
  }

 private:
  ParamSet<S> params_;
  Conv2d<S> c1_, c2_, c3_;
};

template <typename S>
typename Graph<S>::NodeId perceptual_loss_g(Graph<S>& g, const PerceptualExtractor<S>& ex,
                                            typename Graph<S>::NodeId x,
                                            typename Graph<S>::NodeId y) {
  auto fx = ex.features(g, x);
  auto fy = ex.features(g, y);
  auto total = g.mean_all(g.square(g.sub(fx[0], fy[0])));
  for (int s = 1; s < 3; ++s)
    total = g.add(total, g.mean_all(g.square(g.sub(fx[s], fy[s]))));
  return total;
}

template <typename S>
S perceptual_loss(const PerceptualExtractor<S>& ex, const Tensor<S>& x, const Tensor<S>& y) {
  require_same_shape(x, y, "perceptual_loss");
  Graph<S> g;
  return g.value(perceptual_loss_g(g, ex, g.leaf(x), g.leaf(y)))[0];
}

// ---- adversarial loss ------------------------------------------------------------

// Patch discriminator: three stride-2 convolutions and a 1-channel head,
// saturated to per-patch probabilities.
template <typename S>
class Discriminator {
 public:
  Discriminator(uint64_t seed, std::array<int, 3> channels = {16, 32, 64})
      : params_("discriminator") {
    Rng rng(seed);
    c1_ = Conv2d<S>(params_, "c1", 3, channels[0], rng, 3, 2, 1);
    p1_ = PReLU<S>(params_, "c1", channels[0]);
    c2_ = Conv2d<S>(params_, "c2", channels[0], channels[1], rng, 3, 2, 1);
    p2_ = PReLU<S>(params_, "c2", channels[1]);
    c3_ = Conv2d<S>(params_, "c3", channels[1], channels[2], rng, 3, 2, 1);
    p3_ = PReLU<S>(params_, "c3", channels[2]);
    head_ = Conv2d<S>(params_, "head", channels[2], 1, rng);
    params_.register_layer("sigmoid:head");
  }

  ParamSet<S>& params() { return params_; }
  const ParamSet<S>& params() const { return params_; }

  // Per-patch probabilities in (0,1).
  typename Graph<S>::NodeId prob(Graph<S>& g, typename Graph<S>::NodeId x) const {
    auto f = p1_.apply(g, c1_.apply(g, x));
    f = p2_.apply(g, c2_.apply(g, f));
    f = p3_.apply(g, c3_.apply(g, f));
    return g.sigmoid(head_.apply(g, f));
  }

 private:
  ParamSet<S> params_;
  Conv2d<S> c1_, c2_, c3_, head_;
  PReLU<S> p1_, p2_, p3_;
};

// -mean[log p], probabilities floored away from 0/1 before the log.
template <typename S>
typename Graph<S>::NodeId neg_mean_log_g(Graph<S>& g, typename Graph<S>::NodeId p) {
  auto clamped = g.clamp(p, static_cast<S>(kProbEps), S(1) - static_cast<S>(kProbEps));
  return g.scale(g.mean_all(g.log_of(clamped)), S(-1));
}

// Non-saturating generator term: -mean[log D(fake)], through the tape.
template <typename S>
typename Graph<S>::NodeId adversarial_gen_g(Graph<S>& g, const Discriminator<S>& d,
                                            typename Graph<S>::NodeId fake) {
  return neg_mean_log_g(g, d.prob(g, fake));
}

// Discriminator objective on given batches:
//   disc = -mean[log D(real)] - mean[log(1 - D(fake))]
// Fakes must already be detached leaves; no gradient reaches their producer.
template <typename S>
typename Graph<S>::NodeId adversarial_disc_g(Graph<S>& g, const Discriminator<S>& d,
                                             const std::vector<typename Graph<S>::NodeId>& reals,
                                             const std::vector<typename Graph<S>::NodeId>& fakes) {
  require(!reals.empty() && !fakes.empty(), "adversarial_disc: empty batch");
  typename Graph<S>::NodeId real_term = neg_mean_log_g(g, d.prob(g, reals[0]));
  for (size_t i = 1; i < reals.size(); ++i)
    real_term = g.add(real_term, neg_mean_log_g(g, d.prob(g, reals[i])));
  real_term = g.scale(real_term, S(1) / static_cast<S>(reals.size()));

  auto one_minus = [&](typename Graph<S>::NodeId p) { return g.affine(p, S(-1), S(1)); };
  typename Graph<S>::NodeId fake_term =
      neg_mean_log_g(g, one_minus(d.prob(g, fakes[0])));
  for (size_t i = 1; i < fakes.size(); ++i)
    fake_term = g.add(fake_term, neg_mean_log_g(g, one_minus(d.prob(g, fakes[i]))));
  fake_term = g.scale(fake_term, S(1) / static_cast<S>(fakes.size()));

  return g.add(real_term, fake_term);
}

// Value-level pair (gen, disc) over image batches.
template <typename S>
std::pair<S, S> adversarial_losses(const std::vector<Tensor<S>>& reals,
                                   const std::vector<Tensor<S>>& fakes,
                                   const Discriminator<S>& d) {
  require(!reals.empty() && !fakes.empty(), "adversarial_losses: empty batch");
  Graph<S> g;
  std::vector<typename Graph<S>::NodeId> rn, fn;
  for (const auto& r : reals) rn.push_back(g.leaf(r));
  for (const auto& f : fakes) fn.push_back(g.leaf(f));
  auto gen = adversarial_gen_g(g, d, fn[0]);
  for (size_t i = 1; i < fn.size(); ++i) gen = g.add(gen, adversarial_gen_g(g, d, fn[i]));
  gen = g.scale(gen, S(1) / static_cast<S>(fn.size()));
  auto disc = adversarial_disc_g(g, d, rn, fn);
  return {g.value(gen)[0], g.value(disc)[0]};
}

// ---- composite losses -------------------------------------------------------------

template <typename S>
struct LossTerms {
  typename Graph<S>::NodeId total;
  std::vector<std::pair<std::string, typename Graph<S>::NodeId>> parts;  // raw values
};

// loss_u: per-iteration sum of weighted pixel, perceptual, adversarial and the
// two residual supervision terms. Residual targets follow the R = J - I
// convention, so the terms are L_p(J - I, R_k) and L_p(J_hat_k - I, R_k).
template <typename S>
LossTerms<S> loss_u_g(Graph<S>& g, const typename Dehazer<S>::TraceVals& trace,
                      typename Graph<S>::NodeId I, typename Graph<S>::NodeId J,
                      const LossWeights<S>& w, const PerceptualExtractor<S>& extractor,
                      const Discriminator<S>* disc) {
  require(!trace.j.empty(), "loss_u: empty iteration trace");
  w.validate();
  LossTerms<S> out;
  typename Graph<S>::NodeId total = g.leaf(Tensor<S>::constant(1, 1, 1, S(0)));
  auto res_target = g.sub(J, I);
  const int K = static_cast<int>(trace.j.size());
  for (int k = 0; k < K; ++k) {
    const std::string suffix = "_" + std::to_string(k + 1);
    auto pix = pixel_loss_g(g, J, trace.j[k], w.pixel_norm);
    auto feat = perceptual_loss_g(g, extractor, trace.j[k], J);
    typename Graph<S>::NodeId adv;
    if (disc && w.a3 > S(0)) adv = adversarial_gen_g(g, *disc, trace.j[k]);
    else adv = g.leaf(Tensor<S>::constant(1, 1, 1, S(0)));
    auto res_gt = pixel_loss_g(g, res_target, trace.r[k], w.pixel_norm);
    auto res_self = pixel_loss_g(g, g.sub(trace.j[k], I), trace.r[k], w.pixel_norm);

    total = g.add(total, g.scale(pix, w.a1));
    total = g.add(total, g.scale(feat, w.a2));
    if (disc && w.a3 > S(0)) total = g.add(total, g.scale(adv, w.a3));
    total = g.add(total, g.scale(res_gt, w.a4));
    total = g.add(total, g.scale(res_self, w.a5));

    out.parts.emplace_back("u_pix" + suffix, pix);
    out.parts.emplace_back("u_feat" + suffix, feat);
    out.parts.emplace_back("u_adv" + suffix, adv);
    out.parts.emplace_back("u_resgt" + suffix, res_gt);
    out.parts.emplace_back("u_resself" + suffix, res_self);
  }
  out.total = total;
  return out;
}

// loss_v: transmission guidance plus inversion guidance. When no ground-truth
// transmission exists the two transmission terms are masked out and only the
// haze-free supervision remains.
template <typename S>
LossTerms<S> loss_v_g(Graph<S>& g, const typename PhysicsDehazer<S>::StageVals& stages,
                      std::optional<typename Graph<S>::NodeId> t_gt,
                      typename Graph<S>::NodeId J, PixelNorm norm) {
  LossTerms<S> out;
  auto zero = [&] { return g.leaf(Tensor<S>::constant(1, 1, 1, S(0))); };
  auto vt = t_gt ? pixel_loss_g(g, stages.t_hat, *t_gt, norm) : zero();
  auto vtr = t_gt ? pixel_loss_g(g, stages.t_refine, *t_gt, norm) : zero();
  auto vp = pixel_loss_g(g, stages.j_prelim, J, norm);
  auto vr = pixel_loss_g(g, stages.j_refine, J, norm);
  auto total = g.add(g.add(vt, vtr), g.add(vp, vr));
  out.parts.emplace_back("v_t", vt);
  out.parts.emplace_back("v_t_refine", vtr);
  out.parts.emplace_back("v_j_prelim", vp);
  out.parts.emplace_back("v_j_refine", vr);
  out.total = total;
  return out;
}

}  // namespace resdehaze
