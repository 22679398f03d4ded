#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "marvel/trainer.hpp"

namespace marvel::io {

// JSON container holding both networks, optimizer and PopArt state, the
// training config with its hash, and a checksum over all of it. Doubles
// are written with round-trip precision, so loading restores bit-identical
// forward passes.
std::string checkpoint_to_text(const train::Learner& learner, const std::string& scenario_name);

struct LoadedCheckpoint {
  train::Learner learner;
  std::string scenario_name;
  std::uint64_t config_hash = 0;
};

// Throws ValidationError on a malformed or corrupted container, or when
// `expected` is given and its hash differs from the stored one.
LoadedCheckpoint checkpoint_from_text(const std::string& text,
                                      const std::optional<train::TrainConfig>& expected = {});

void save_checkpoint(const std::string& path, const train::Learner& learner,
                     const std::string& scenario_name);
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const std::optional<train::TrainConfig>& expected = {});

}  // namespace marvel::io
