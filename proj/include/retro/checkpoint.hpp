// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "retro/model.hpp"
#include "retro/vocab.hpp"

namespace retro {

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ModelParams params;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Versioned binary: magic, length-prefixed key=value config text (model
// fields plus the frozen vocabulary), then each named parameter as
// name / rank / dims / raw little-endian 64-bit floats. Round trips
// bit-exactly. Writes go through a temp file and rename.
void save_checkpoint(const std::string& path, const ModelConfig& config, const Vocab& vocab,
                     const ModelParams& params);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace retro
