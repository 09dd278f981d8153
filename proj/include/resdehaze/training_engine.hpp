#pragma once

#include <functional>
#include <json.hpp>
#include <numeric>
#include <string>
#include <vector>

#include "resdehaze/data_pipeline.hpp"
#include "resdehaze/models.hpp"
#include "resdehaze/objectives.hpp"

namespace resdehaze {

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int batch = 4;
  int steps = 20000;
  int patch = 64;  // random-crop side; must be a multiple of 4
  LossWeights<float> weights;
  bool adversarial = true;
  uint64_t seed = 7;
  int checkpoint_interval = 1000;
  bool strict = false;  // force single-threaded execution
  int log_every = 100;  // progress lines to stdout; 0 silences

  void validate() const {
    require(steps >= 1, "train: step count must be >= 1");
    require(batch >= 1, "train: batch size must be >= 1");
    require(lr > 0, "train: learning rate must be > 0");
    require(patch >= 8 && patch % 4 == 0, "train: patch must be a multiple of 4");
    require(checkpoint_interval >= 1, "train: checkpoint interval must be >= 1");
    weights.validate();
  }
};

struct TrainResult {
  long final_step = 0;
  std::string last_checkpoint;
};

// Runs the full optimization: per step, K recurrent dehazer iterations, the
// scattering-model stage on the final iterate, the composite objective, a
// discriminator update followed by a generator-side update, and an
// adaptive-moment step. Emits one CSV row per step to out_dir/loss_log.csv and
// checkpoints at the configured interval. Reproducible bit-for-bit from the
// seed; batch items are processed on worker threads unless cfg.strict, with a
// fixed-order gradient reduction either way.
TrainResult train(Models<float>& models, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::string& out_dir, const nlohmann::json& config_snapshot,
                  bool resume = false);

// ---- finite-difference verification -------------------------------------------

// Central-difference check of the tape gradient for an arbitrary scalar-valued
// builder over leaf tensors. Returns the max over checked coordinates of
//   |analytic - fd| / max(|analytic|, |fd|, 1e-8).
// All coordinates are checked unless max_coords caps them (seeded subset).
template <typename S>
double grad_check(
    const std::function<typename Graph<S>::NodeId(Graph<S>&, const std::vector<typename Graph<S>::NodeId>&)>& build,
    const std::vector<Tensor<S>>& point, S eps, int max_coords = -1,
    uint64_t coord_seed = 12345) {
  long n = 0;
  for (const auto& t : point) n += t.size();
  require(n > 0 && n <= 10000, "grad_check: point must have 1..10^4 scalar inputs");

  std::vector<Tensor<S>> analytic;
  {
    Graph<S> g;
    std::vector<typename Graph<S>::NodeId> leaves;
    for (const auto& t : point) leaves.push_back(g.leaf(t));
    auto root = build(g, leaves);
    g.backward(root);
    for (auto id : leaves) {
      g.ensure_grad(id);
      analytic.push_back(g.grad(id));
    }
  }

  auto eval = [&](const std::vector<Tensor<S>>& p) -> double {
    Graph<S> g;
    std::vector<typename Graph<S>::NodeId> leaves;
    for (const auto& t : p) leaves.push_back(g.leaf(t));
    return static_cast<double>(g.value(build(g, leaves))[0]);
  };

  std::vector<long> coords(n);
  std::iota(coords.begin(), coords.end(), 0L);
  if (max_coords > 0 && max_coords < n) {
    Rng rng(coord_seed);
    for (int i = 0; i < max_coords; ++i) {
      const long j = i + rng.uniform_int(static_cast<int>(n - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  std::vector<Tensor<S>> work = point;
  double max_rel = 0.0;
  for (long flat : coords) {
    long off = flat;
    size_t ti = 0;
    while (off >= work[ti].size()) off -= work[ti++].size();
    const S saved = work[ti][static_cast<int>(off)];
    work[ti][static_cast<int>(off)] = saved + eps;
    const double up = eval(work);
    work[ti][static_cast<int>(off)] = saved - eps;
    const double dn = eval(work);
    work[ti][static_cast<int>(off)] = saved;
    const double fd = (up - dn) / (2.0 * static_cast<double>(eps));
    const double an = static_cast<double>(analytic[ti][static_cast<int>(off)]);
    const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
    max_rel = std::max(max_rel, std::abs(an - fd) / denom);
  }
  return max_rel;
}

}  // namespace resdehaze
