#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "dcmgnn/model.hpp"
#include "dcmgnn/training.hpp"

namespace dcmgnn {

// Versioned text dump of a run. Doubles are written in shortest round-trip
// form, so save/load is exact; a trailing checksum rejects damaged files.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> meta;
  ModelParams params;
  std::optional<ModelParams> best;
  std::optional<AdamState> adam;
  std::map<std::string, std::string> rng;  // stream name -> engine state
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws ParseError on a malformed, truncated or tampered file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dcmgnn
