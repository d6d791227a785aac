#pragma once

#include <string>

#include "sqzt/config.hpp"
#include "sqzt/model.hpp"
#include "sqzt/train.hpp"

namespace sqzt {

/// "SQZT" checkpoint: magic, format version, config echo, epoch counter,
/// named tensors (parameters and batchnorm running stats, little-endian),
/// optimizer momentum buffers and the RNG state string. load(save(state))
/// reproduces training bit-exactly from the same point.
struct Checkpoint {
  Config config;
  int epoch = 0;  // epochs completed
  ModelF model;   // rebuilt from the config echo and filled by name
  SgdState opt;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const Config& cfg, ModelF& model,
                     const SgdState& opt, int epoch, const std::string& rng_state = "");

Checkpoint load_checkpoint(const std::string& path);

}  // namespace sqzt
