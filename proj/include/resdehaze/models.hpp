#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "resdehaze/model_free_dehazer.hpp"
#include "resdehaze/objectives.hpp"
#include "resdehaze/physics_dehazer.hpp"

namespace resdehaze {

struct ModelSpec {
  int K = 3;
  double t_min = kDefaultTMin;
  double eps_a = kDefaultEpsA;
  DehazerArch dehazer;
  PhysicsArch physics;
  std::array<int, 3> discriminator_channels{16, 32, 64};
  std::array<int, 3> perceptual_channels{8, 16, 32};
};

// All four networks, constructed from one master seed. Sub-seeds are derived
// per subsystem so changing the seed re-randomizes every initialization.
template <typename S>
struct Models {
  ModelSpec spec;
  Dehazer<S> dehazer;
  PhysicsDehazer<S> physics;
  Discriminator<S> discriminator;
  PerceptualExtractor<S> perceptual;

  Models(const ModelSpec& sp, uint64_t seed)
      : spec(sp),
        dehazer(sp.dehazer, Rng::mix(seed, 1)),
        physics(sp.physics, Rng::mix(seed, 2),
                HazePhysicsConfig<S>{static_cast<S>(sp.t_min), static_cast<S>(sp.eps_a)}),
        discriminator(Rng::mix(seed, 3), sp.discriminator_channels),
        perceptual(Rng::mix(seed, 4), sp.perceptual_channels) {}
};

}  // namespace resdehaze
