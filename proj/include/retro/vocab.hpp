// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "retro/smiles.hpp"

namespace retro {

// Token inventory frozen at training time. Ids 0..3 are reserved specials;
// unseen tokens map to kUnk at inference instead of failing.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocab();
  // Tokens are deduplicated and sorted so the mapping is reproducible.
  static Vocab build(const std::vector<std::string>& tokens);
  static Vocab from_id_list(std::vector<std::string> id_to_token);

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::vector<std::string>& id_list() const { return id_to_token_; }

  // SMILES tokens -> ids (no specials appended).
  std::vector<int> encode(const TokenSequence& seq) const;
  // ids -> concatenated token text, skipping specials.
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  void rebuild_index();
};

}  // namespace retro
