// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "retro/model.hpp"

namespace retro {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  long long batch_tokens = 4096;
  double schedule_factor = 2.0;  // scales the inverse-sqrt schedule
  int warmup_steps = 4000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  double label_smoothing = 0.0;
  int validate_every = 1000;
  int patience = 40;  // validations without improvement before stopping
  int max_steps = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

// Line-oriented `key = value`; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> read_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin);

// Applies keys onto the model/train configs; any unrecognized key throws.
void apply_config(const std::map<std::string, std::string>& kv, ModelConfig& model,
                  TrainConfig& train);

// All knobs materialized back to text, one key per line.
std::vector<std::pair<std::string, std::string>> resolved_config(const ModelConfig& model,
                                                                 const TrainConfig& train);

inline constexpr const char* kArtifactVersion = "retro 0.1.0";

// Key=value manifest written atomically (temp file + rename) next to a
// command's outputs; output path is `<stem>.manifest`.
class ManifestWriter {
 public:
  explicit ManifestWriter(std::string command);
  void add(const std::string& key, const std::string& value);
  void add_all(const std::vector<std::pair<std::string, std::string>>& entries,
               const std::string& prefix = "");
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace retro
