#include "resdehaze/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace resdehaze {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'D', 'H', 'Z', 'C', 'K', 'P', 'T'};

template <typename F>
void for_each_group(Models<float>& m, F&& f) {
  f(m.dehazer.params());
  f(m.physics.params());
  f(m.discriminator.params());
  f(m.perceptual.params());
}
template <typename F>
void for_each_group(const Models<float>& m, F&& f) {
  f(m.dehazer.params());
  f(m.physics.params());
  f(m.discriminator.params());
  f(m.perceptual.params());
}

void write_array(std::ofstream& out, const Tensor<float>& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

void read_array(std::ifstream& in, Tensor<float>& t) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const std::string& path, const Models<float>& models,
                     const CheckpointMeta& meta) {
  json dir;
  for_each_group(models, [&](const ParamSet<float>& ps) {
    json arr = json::array();
    for (size_t i = 0; i < ps.size(); ++i) {
      const auto& p = ps[i];
      arr.push_back({{"name", p.name},
                     {"shape", {p.value.c(), p.value.h(), p.value.w()}},
                     {"trainable", p.trainable}});
    }
    dir[ps.group()] = std::move(arr);
  });

  json header;
  header["version"] = kCheckpointVersion;
  header["step"] = meta.step;
  header["gen_opt_steps"] = meta.gen_opt_steps;
  header["disc_opt_steps"] = meta.disc_opt_steps;
  header["rng"] = meta.rng_state;
  header["config"] = meta.config;
  header["arrays"] = std::move(dir);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for_each_group(models, [&](const ParamSet<float>& ps) {
    for (size_t i = 0; i < ps.size(); ++i) {
      write_array(out, ps[i].value);
      write_array(out, ps[i].m);
      write_array(out, ps[i].v);
    }
  });
  out.flush();
  if (!out.good()) throw std::runtime_error("checkpoint: write failed: " + path);
}

namespace {

json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in.good() || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: format version " + std::to_string(version) +
                             " not supported (expected " +
                             std::to_string(kCheckpointVersion) + "): " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in.good()) throw std::runtime_error("checkpoint: truncated header in " + path);
  return json::parse(text);
}

}  // namespace

CheckpointMeta load_checkpoint(const std::string& path, Models<float>& models) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("checkpoint: cannot open: " + path);
  json header = read_header(in, path);

  CheckpointMeta meta;
  meta.step = header.at("step").get<long>();
  meta.gen_opt_steps = header.at("gen_opt_steps").get<long>();
  meta.disc_opt_steps = header.at("disc_opt_steps").get<long>();
  meta.rng_state = header.at("rng").get<std::array<uint64_t, 4>>();
  meta.config = header.at("config");

  const json& dir = header.at("arrays");
  for_each_group(models, [&](ParamSet<float>& ps) {
    const json& arr = dir.at(ps.group());
    require(arr.size() == ps.size(),
            "checkpoint: group '" + ps.group() + "' has " + std::to_string(arr.size()) +
                " arrays, model expects " + std::to_string(ps.size()));
    for (size_t i = 0; i < ps.size(); ++i) {
      auto& p = ps[i];
      const json& e = arr[i];
      require(e.at("name").get<std::string>() == p.name,
              "checkpoint: array name mismatch at index " + std::to_string(i) + " in '" +
                  ps.group() + "': " + e.at("name").get<std::string>() + " vs " + p.name);
      auto shape = e.at("shape").get<std::vector<int>>();
      require(shape.size() == 3 && shape[0] == p.value.c() && shape[1] == p.value.h() &&
                  shape[2] == p.value.w(),
              "checkpoint: shape mismatch for " + p.name);
      read_array(in, p.value);
      read_array(in, p.m);
      read_array(in, p.v);
    }
  });
  if (!in.good()) throw std::runtime_error("checkpoint: truncated data in " + path);
  return meta;
}

nlohmann::json peek_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("checkpoint: cannot open: " + path);
  return read_header(in, path).at("config");
}

}  // namespace resdehaze
