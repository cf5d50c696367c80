#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "memiml/numgrad/param_set.hpp"

namespace memiml::nets {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  numgrad::ParamSet params;
  nlohmann::json meta;
};

// Flat named-tensor container: an 8-byte magic "MEMIMLCK", a little-endian
// u64 index length, a JSON index listing each tensor's name, shape and
// element offset, then every tensor's values as little-endian IEEE-754
// doubles in index order. `meta` is stored inside the index verbatim.
// See docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path& path, const numgrad::ParamSet& params, const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace memiml::nets
