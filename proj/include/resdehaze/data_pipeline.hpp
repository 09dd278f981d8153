#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "resdehaze/haze_physics.hpp"
#include "resdehaze/rng.hpp"
#include "resdehaze/tensor.hpp"

namespace resdehaze {

// One paired sample. t and A are absent for datasets without ground-truth
// transmission (real-capture regime); I and J always share dimensions.
struct Sample {
  std::string id;
  Tensor<float> hazy;
  Tensor<float> clean;
  std::optional<Tensor<float>> trans;
  std::optional<Atmosphere<float>> alight;
};

// On-disk layout: root/{hazy,clean,trans}/<id>.png plus manifest.json with
// {"split","has_transmission","ids":[...]}. Synthesis additionally writes
// gen_params.json (per-id beta and A) for provenance and consistency checks.
struct DatasetManifest {
  std::string root;
  std::string split;
  bool has_transmission = false;
  std::vector<std::string> ids;

  int count() const { return static_cast<int>(ids.size()); }
  std::string hazy_path(const std::string& id) const { return root + "/hazy/" + id + ".png"; }
  std::string clean_path(const std::string& id) const { return root + "/clean/" + id + ".png"; }
  std::string trans_path(const std::string& id) const { return root + "/trans/" + id + ".png"; }
};

void write_manifest(const DatasetManifest& m);

// Parses root/manifest.json and checks that every listed file exists.
DatasetManifest read_manifest(const std::string& root);

struct LoadOptions {
  int center_crop = 0;  // 0 = full frames
};

// Loads every sample eagerly, in manifest id order. Missing or undecodable
// files are hard errors naming the id.
std::vector<Sample> load_dataset(const DatasetManifest& m, const LoadOptions& opts = {});

struct SynthesisOptions {
  std::string split = "train";
  int count = 0;
  int size = 96;
  std::array<double, 2> beta_range{0.4, 1.6};
  std::array<double, 2> a_range{0.7, 1.0};  // one scalar, broadcast to all channels
  uint64_t seed = 0;
  double d_max = 5.0;
  double t_min = kDefaultTMin;
  std::string clean_dir;  // when set, clean frames come from PNGs here
};

// Smooth seeded depth field: sum of 3 two-dimensional cosine ramps, min-max
// normalized to [0, d_max].
Tensor<float> cosine_depth_field(Rng& rng, int h, int w, double d_max);

// Procedural clean frame: smooth color background plus soft-edged shapes.
Tensor<float> procedural_clean_image(Rng& rng, int size);

// Synthesizes one split under root. Fully reproducible from the seed; returns
// the written manifest.
DatasetManifest generate_synthetic(const std::string& root, const SynthesisOptions& opts);

// Per-id synthesis parameters from gen_params.json, if present.
struct GenParams {
  double beta = 0.0;
  Atmosphere<float> alight;
};
std::map<std::string, GenParams> read_gen_params(const std::string& root);

}  // namespace resdehaze
