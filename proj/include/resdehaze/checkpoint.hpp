#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <string>

#include "resdehaze/models.hpp"

namespace resdehaze {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  long step = 0;
  long gen_opt_steps = 0;
  long disc_opt_steps = 0;
  std::array<uint64_t, 4> rng_state{};
  nlohmann::json config;  // resolved experiment config snapshot
};

// Single binary container: magic, format version, a JSON metadata header
// (step, optimizer counters, rng state, config, array directory), then the raw
// float32 arrays (value, m, v per parameter) in registry order. Save -> load ->
// save is byte-identical; a version mismatch is rejected, never coerced.
void save_checkpoint(const std::string& path, const Models<float>& models,
                     const CheckpointMeta& meta);

CheckpointMeta load_checkpoint(const std::string& path, Models<float>& models);

// Reads only the metadata header (for constructing Models before a full load).
nlohmann::json peek_checkpoint_config(const std::string& path);

}  // namespace resdehaze
