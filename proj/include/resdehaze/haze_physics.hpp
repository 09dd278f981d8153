#pragma once

#include <Eigen/Core>
#include <cmath>

#include "resdehaze/graph.hpp"
#include "resdehaze/tensor.hpp"

namespace resdehaze {

// Atmospheric scattering identities. Images are (3,H,W) in [0,1], transmission
// maps (1,H,W) in [t_min,1], the global atmospheric light one triple broadcast
// over all pixels. Two parallel forms are provided: plain tensor functions
// (dataset synthesis, oracles) and tape ops carrying gradients; both follow the
// same guard and clamp rules.

template <typename S>
using Image = Tensor<S>;
template <typename S>
using TransmissionMap = Tensor<S>;
template <typename S>
using ResidualMap = Tensor<S>;
template <typename S>
using Atmosphere = Eigen::Array<S, 3, 1>;

template <typename S>
struct HazePhysicsConfig {
  S t_min = static_cast<S>(kDefaultTMin);
  S eps_a = static_cast<S>(kDefaultEpsA);
};

namespace detail {
template <typename S>
void require_image(const Tensor<S>& t, const char* what) {
  require(t.c() == 3, std::string(what) + ": expected a 3-channel image, got " +
                          t.shape().str());
  require_finite(t, what);
}
template <typename S>
void require_tmap(const Tensor<S>& t, const char* what) {
  require(t.c() == 1, std::string(what) + ": expected a 1-channel map, got " +
                          t.shape().str());
  require_finite(t, what);
}
}  // namespace detail

// I = J*t + A*(1-t), clamped to [0,1].
template <typename S>
Image<S> synthesize_haze(const Image<S>& J, const TransmissionMap<S>& t,
                         const Atmosphere<S>& A,
                         const HazePhysicsConfig<S>& cfg = {}) {
  detail::require_image(J, "synthesize_haze");
  detail::require_tmap(t, "synthesize_haze");
  require(J.h() == t.h() && J.w() == t.w(),
          "synthesize_haze: image/transmission shape mismatch " + J.shape().str() +
              " vs " + t.shape().str());
  require(A.isFinite().all(), "synthesize_haze: non-finite atmospheric light");
  require((t.array() >= cfg.t_min - S(1e-7)).all() && (t.array() <= S(1) + S(1e-7)).all(),
          "synthesize_haze: transmission outside [t_min, 1]");
  Image<S> I(3, J.h(), J.w());
  for (int c = 0; c < 3; ++c)
    I.plane(c) = (J.plane(c) * t.plane(0) + A[c] * (S(1) - t.plane(0)))
                     .max(S(0)).min(S(1));
  return I;
}

// J = (I - A*(1-t)) / t, clamped to [0,1]. Caller must supply t >= t_min.
template <typename S>
Image<S> invert_scattering(const Image<S>& I, const TransmissionMap<S>& t,
                           const Atmosphere<S>& A,
                           const HazePhysicsConfig<S>& cfg = {}) {
  detail::require_image(I, "invert_scattering");
  detail::require_tmap(t, "invert_scattering");
  require(I.h() == t.h() && I.w() == t.w(),
          "invert_scattering: image/transmission shape mismatch");
  require((t.array() >= cfg.t_min - S(1e-7)).all(),
          "invert_scattering: transmission below t_min; clamp before inverting");
  Image<S> J(3, I.h(), I.w());
  for (int c = 0; c < 3; ++c)
    J.plane(c) = ((I.plane(c) - A[c] * (S(1) - t.plane(0))) / t.plane(0))
                     .max(S(0)).min(S(1));
  return J;
}

// R = J - I.
template <typename S>
ResidualMap<S> residual_of(const Image<S>& I, const Image<S>& J) {
  detail::require_image(I, "residual_of");
  detail::require_image(J, "residual_of");
  require_same_shape(I, J, "residual_of");
  return ResidualMap<S>(I.shape(), J.array() - I.array());
}

// t = 1 - R/(J - A), per channel, reduced to one map by the channel mean. The
// denominator magnitude is floored at eps_a (sign kept, sign(0) -> +), then the
// map is clamped to [t_min, 1].
template <typename S>
TransmissionMap<S> transmission_from_residual(const ResidualMap<S>& R, const Image<S>& J,
                                              const Atmosphere<S>& A,
                                              const HazePhysicsConfig<S>& cfg = {}) {
  detail::require_image(R, "transmission_from_residual");
  detail::require_image(J, "transmission_from_residual");
  require_same_shape(R, J, "transmission_from_residual");
  require(A.isFinite().all(), "transmission_from_residual: non-finite A");
  TransmissionMap<S> t(1, J.h(), J.w());
  auto acc = t.plane(0);
  acc.setZero();
  const int n = J.plane_size();
  for (int c = 0; c < 3; ++c) {
    auto Jp = J.plane(c);
    auto Rp = R.plane(c);
    for (int i = 0; i < n; ++i) {
      S d = Jp[i] - A[c];
      if (d < cfg.eps_a && d > -cfg.eps_a) d = (d >= S(0)) ? cfg.eps_a : -cfg.eps_a;
      acc[i] += Rp[i] / d;
    }
  }
  t.plane(0) = (S(1) - acc / S(3)).max(cfg.t_min).min(S(1));
  return t;
}

// t = exp(-beta * depth), clamped to [t_min, 1].
template <typename S>
TransmissionMap<S> transmission_from_depth(const Tensor<S>& depth, S beta,
                                           const HazePhysicsConfig<S>& cfg = {}) {
  detail::require_tmap(depth, "transmission_from_depth");
  require(beta > S(0), "transmission_from_depth: beta must be > 0");
  require((depth.array() >= S(0)).all(), "transmission_from_depth: negative depth");
  TransmissionMap<S> t(1, depth.h(), depth.w());
  t.plane(0) = (-beta * depth.plane(0)).exp().max(cfg.t_min).min(S(1));
  return t;
}

// ---- tape variants -----------------------------------------------------------
// A enters as a (3,1,1) node; t as (1,H,W).

template <typename S>
typename Graph<S>::NodeId synthesize_haze_g(Graph<S>& g, typename Graph<S>::NodeId J,
                                            typename Graph<S>::NodeId t,
                                            typename Graph<S>::NodeId A) {
  const auto& Jv = g.value(J);
  auto t3 = g.repeat_c(t, 3);
  auto A3 = g.broadcast_spatial(A, Jv.h(), Jv.w());
  auto one_minus_t = g.affine(t3, S(-1), S(1));
  auto I = g.add(g.mul(J, t3), g.mul(A3, one_minus_t));
  return g.clamp(I, S(0), S(1));
}

template <typename S>
typename Graph<S>::NodeId invert_scattering_g(Graph<S>& g, typename Graph<S>::NodeId I,
                                              typename Graph<S>::NodeId t,
                                              typename Graph<S>::NodeId A) {
  const auto& Iv = g.value(I);
  auto t3 = g.repeat_c(t, 3);
  auto A3 = g.broadcast_spatial(A, Iv.h(), Iv.w());
  auto airlight = g.mul(A3, g.affine(t3, S(-1), S(1)));
  auto J = g.div(g.sub(I, airlight), t3);
  return g.clamp(J, S(0), S(1));
}

template <typename S>
typename Graph<S>::NodeId transmission_from_residual_g(
    Graph<S>& g, typename Graph<S>::NodeId R, typename Graph<S>::NodeId J,
    typename Graph<S>::NodeId A, const HazePhysicsConfig<S>& cfg = {}) {
  const auto& Jv = g.value(J);
  auto A3 = g.broadcast_spatial(A, Jv.h(), Jv.w());
  auto denom = g.guard_magnitude(g.sub(J, A3), cfg.eps_a);
  auto quot = g.channel_mean(g.div(R, denom));
  auto t = g.affine(quot, S(-1), S(1));
  return g.clamp(t, cfg.t_min, S(1));
}

}  // namespace resdehaze
