#pragma once

#include <map>
#include <string>
#include <utility>

#include "navrl/config.hpp"
#include "navrl/policy.hpp"
#include "navrl/ppo.hpp"

namespace navrl {

// Self-describing checkpoint container: versioned magic header, canonical
// config text, named parameter tensors (row-major little-endian float32),
// optimizer moments and RNG stream states.
struct Checkpoint {
  EngineConfig config;
  int64_t global_step = 0;
  int64_t update_count = 0;
  int64_t adam_step = 0;
  std::map<std::string, MatF> tensors;
  std::map<std::string, std::pair<uint64_t, uint64_t>> rng_states;  // (base, counter)
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Tensors from a model (+ optional optimizer moments under adam.m/ adam.v/).
void checkpoint_from_model(Checkpoint& ck, const PolicyModel<float>& model,
                           const AdamOptimizer<float>* opt);

// Restores parameters (and moments when an optimizer is given). Throws
// ConfigError when the checkpoint's architecture does not match the model.
void restore_into_model(const Checkpoint& ck, PolicyModel<float>& model,
                        AdamOptimizer<float>* opt);

}  // namespace navrl
