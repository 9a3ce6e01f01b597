// SPDX-License-Identifier: Apache-2.0
#include "retro/vocab.hpp"

#include <algorithm>
#include <stdexcept>

namespace retro {

namespace {
const char* kSpecials[] = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocab::Vocab() {
  for (const char* s : kSpecials) id_to_token_.emplace_back(s);
  rebuild_index();
}

Vocab Vocab::build(const std::vector<std::string>& tokens) {
  std::vector<std::string> unique = tokens;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  Vocab vocab;
  for (auto& t : unique) vocab.id_to_token_.push_back(std::move(t));
  vocab.rebuild_index();
  return vocab;
}

Vocab Vocab::from_id_list(std::vector<std::string> id_to_token) {
  Vocab vocab;
  for (int i = 0; i < 4; ++i)
    if (static_cast<std::size_t>(i) >= id_to_token.size() || id_to_token[i] != kSpecials[i])
      throw std::invalid_argument("Vocab::from_id_list: special tokens missing or reordered");
  vocab.id_to_token_ = std::move(id_to_token);
  vocab.rebuild_index();
  return vocab;
}

void Vocab::rebuild_index() {
  token_to_id_.clear();
  for (int i = 0; i < static_cast<int>(id_to_token_.size()); ++i)
    token_to_id_.emplace(id_to_token_[i], i);
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("Vocab::token: id out of range");
  return id_to_token_[id];
}

std::vector<int> Vocab::encode(const TokenSequence& seq) const {
  std::vector<int> ids;
  ids.reserve(seq.tokens.size());
  for (const auto& t : seq.tokens) ids.push_back(id(t.text));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    out += token(id);
  }
  return out;
}

}  // namespace retro
