#include "resdehaze/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "resdehaze/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace resdehaze {

void write_manifest(const DatasetManifest& m) {
  json j;
  j["split"] = m.split;
  j["has_transmission"] = m.has_transmission;
  j["ids"] = m.ids;
  std::ofstream out(m.root + "/manifest.json");
  require(out.good(), "cannot write manifest under " + m.root);
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& root) {
  const std::string path = root + "/manifest.json";
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("manifest not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest parse failed (" + path + "): " + e.what());
  }
  DatasetManifest m;
  m.root = root;
  m.split = j.at("split").get<std::string>();
  m.has_transmission = j.at("has_transmission").get<bool>();
  m.ids = j.at("ids").get<std::vector<std::string>>();
  for (const auto& id : m.ids) {
    if (!fs::exists(m.hazy_path(id)))
      throw std::runtime_error("manifest lists missing file for id '" + id + "': " +
                               m.hazy_path(id));
    if (!fs::exists(m.clean_path(id)))
      throw std::runtime_error("manifest lists missing file for id '" + id + "': " +
                               m.clean_path(id));
    if (m.has_transmission && !fs::exists(m.trans_path(id)))
      throw std::runtime_error("manifest lists missing file for id '" + id + "': " +
                               m.trans_path(id));
  }
  return m;
}

namespace {

Tensor<float> center_crop(const Tensor<float>& t, int crop) {
  if (crop <= 0 || (t.h() == crop && t.w() == crop)) return t;
  require(t.h() >= crop && t.w() >= crop, "center_crop: image smaller than crop");
  const int y0 = (t.h() - crop) / 2, x0 = (t.w() - crop) / 2;
  Tensor<float> out(t.c(), crop, crop);
  for (int c = 0; c < t.c(); ++c)
    for (int y = 0; y < crop; ++y)
      for (int x = 0; x < crop; ++x) out(c, y, x) = t(c, y0 + y, x0 + x);
  return out;
}

}  // namespace

std::vector<Sample> load_dataset(const DatasetManifest& m, const LoadOptions& opts) {
  std::vector<Sample> out;
  out.reserve(m.ids.size());
  const auto gen_params = read_gen_params(m.root);
  for (const auto& id : m.ids) {
    Sample s;
    s.id = id;
    try {
      s.hazy = center_crop(read_png_rgb8(m.hazy_path(id)), opts.center_crop);
      s.clean = center_crop(read_png_rgb8(m.clean_path(id)), opts.center_crop);
      if (m.has_transmission)
        s.trans = center_crop(read_png_gray16(m.trans_path(id)), opts.center_crop);
    } catch (const std::exception& e) {
      throw std::runtime_error("failed to load sample '" + id + "': " + e.what());
    }
    require(s.hazy.same_shape(s.clean), "sample '" + id + "': hazy/clean shape mismatch");
    if (s.trans)
      require(s.trans->h() == s.hazy.h() && s.trans->w() == s.hazy.w(),
              "sample '" + id + "': transmission spatial dims mismatch");
    if (auto it = gen_params.find(id); it != gen_params.end()) s.alight = it->second.alight;
    out.push_back(std::move(s));
  }
  return out;
}

Tensor<float> cosine_depth_field(Rng& rng, int h, int w, double d_max) {
  Tensor<double> d(1, h, w);
  for (int i = 0; i < 3; ++i) {
    const double fy = rng.uniform(0.5, 2.5), fx = rng.uniform(0.5, 2.5);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    const double amp = rng.uniform(0.5, 1.0);
    const double sy = rng.coin() ? 1.0 : -1.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        d(0, y, x) += amp * std::cos(6.283185307179586 *
                                         (sy * fy * y / h + fx * x / w) + phase);
  }
  const double lo = d.array().minCoeff(), hi = d.array().maxCoeff();
  const double range = hi - lo;
  Tensor<float> out(1, h, w);
  if (range < 1e-12) return out;
  out.array() = ((d.array() - lo) / range * d_max).cast<float>();
  return out;
}

Tensor<float> procedural_clean_image(Rng& rng, int size) {
  Tensor<float> img(3, size, size);
  // smooth color background
  for (int c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.25, 0.75);
    const double fy = rng.uniform(0.5, 2.0), fx = rng.uniform(0.5, 2.0);
    const double ph = rng.uniform(0.0, 6.283185307179586);
    const double amp = rng.uniform(0.05, 0.2);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        img(c, y, x) = static_cast<float>(
            base + amp * std::cos(6.283185307179586 * (fy * y + fx * x) / size + ph));
  }
  // soft-edged shapes: ellipses and axis-aligned boxes in random colors
  const int shapes = 6 + rng.uniform_int(6);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.coin();
    const double cy = rng.uniform(0.1, 0.9) * size, cx = rng.uniform(0.1, 0.9) * size;
    const double ry = rng.uniform(0.06, 0.3) * size, rx = rng.uniform(0.06, 0.3) * size;
    const double edge = rng.uniform(1.0, 3.0);
    const float col[3] = {static_cast<float>(rng.uniform(0.05, 0.95)),
                          static_cast<float>(rng.uniform(0.05, 0.95)),
                          static_cast<float>(rng.uniform(0.05, 0.95))};
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        double dist;
        if (ellipse) {
          const double ny = (y - cy) / ry, nx = (x - cx) / rx;
          dist = std::sqrt(ny * ny + nx * nx) - 1.0;
        } else {
          dist = std::max(std::abs(y - cy) / ry, std::abs(x - cx) / rx) - 1.0;
        }
        const double cover = 1.0 / (1.0 + std::exp(dist * ry * edge));
        if (cover < 1e-3) continue;
        for (int c = 0; c < 3; ++c)
          img(c, y, x) = static_cast<float>((1.0 - cover) * img(c, y, x) + cover * col[c]);
      }
  }
  img.array() = img.array().max(0.02f).min(0.98f);
  return img;
}

namespace {

std::vector<std::string> list_pngs(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

uint64_t split_tag(const std::string& split) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : split) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}

}  // namespace

DatasetManifest generate_synthetic(const std::string& root, const SynthesisOptions& opts) {
  require(opts.count >= 0, "generate_synthetic: negative count");
  require(opts.beta_range[0] > 0 && opts.beta_range[1] >= opts.beta_range[0],
          "generate_synthetic: beta_range must be within (0, inf)");
  require(opts.a_range[0] >= 0.0 && opts.a_range[1] <= 1.0 &&
              opts.a_range[1] >= opts.a_range[0],
          "generate_synthetic: A_range must be within [0, 1]");
  fs::create_directories(root + "/hazy");
  fs::create_directories(root + "/clean");
  fs::create_directories(root + "/trans");

  std::vector<std::string> cleans;
  if (!opts.clean_dir.empty()) cleans = list_pngs(opts.clean_dir);

  DatasetManifest m;
  m.root = root;
  m.split = opts.split;
  m.has_transmission = true;
  json params;

  HazePhysicsConfig<float> phys;
  phys.t_min = static_cast<float>(opts.t_min);

  const int n = opts.clean_dir.empty() ? opts.count
                                       : static_cast<int>(cleans.size());
  int written = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::mix(Rng::mix(opts.seed, split_tag(opts.split)), static_cast<uint64_t>(i)));
    Tensor<float> clean;
    if (opts.clean_dir.empty()) {
      clean = procedural_clean_image(rng, opts.size);
    } else {
      try {
        clean = read_png_rgb8(cleans[i]);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "warning: skipping unreadable clean image %s (%s)\n",
                     cleans[i].c_str(), e.what());
        continue;
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05d", opts.split.c_str(), written);
    const std::string id = buf;

    Tensor<float> depth = cosine_depth_field(rng, clean.h(), clean.w(), opts.d_max);
    const float beta = static_cast<float>(rng.uniform(opts.beta_range[0], opts.beta_range[1]));
    const float a = static_cast<float>(rng.uniform(opts.a_range[0], opts.a_range[1]));
    const Atmosphere<float> A(a, a, a);
    Tensor<float> t = transmission_from_depth(depth, beta, phys);
    Tensor<float> hazy = synthesize_haze(clean, t, A, phys);

    write_png_rgb8(m.clean_path(id), clean);
    write_png_rgb8(m.hazy_path(id), hazy);
    write_png_gray16(m.trans_path(id), t);
    params[id] = {{"beta", beta}, {"A", {a, a, a}}};
    m.ids.push_back(id);
    ++written;
  }
  write_manifest(m);
  std::ofstream out(root + "/gen_params.json");
  out << params.dump(2) << "\n";
  return m;
}

std::map<std::string, GenParams> read_gen_params(const std::string& root) {
  std::map<std::string, GenParams> out;
  std::ifstream in(root + "/gen_params.json");
  if (!in.good()) return out;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error&) {
    return out;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    GenParams gp;
    gp.beta = it.value().at("beta").get<double>();
    auto a = it.value().at("A").get<std::vector<double>>();
    gp.alight = Atmosphere<float>(static_cast<float>(a.at(0)), static_cast<float>(a.at(1)),
                                  static_cast<float>(a.at(2)));
    out[it.key()] = gp;
  }
  return out;
}

}  // namespace resdehaze
