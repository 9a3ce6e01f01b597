// SPDX-License-Identifier: Apache-2.0
#include "retro/augment.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "retro/rng.hpp"

namespace retro {

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
    case Split::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::optional<Split> split_from_string(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "valid") return Split::Valid;
  if (name == "test") return Split::Test;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_on_dots(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '.') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

ParsedReaction parse_reaction(const ReactionRecord& record) {
  ParsedReaction out;
  try {
    out.product = parse(record.product);
  } catch (const SmilesError& e) {
    throw ParseFailure("record " + record.id + ": product does not parse: " + e.what());
  }
  out.reactant_texts = split_on_dots(record.reactants);
  for (const auto& text : out.reactant_texts) {
    try {
      out.reactant_parts.push_back(parse(text));
    } catch (const SmilesError& e) {
      throw ParseFailure("record " + record.id + ": reactant '" + text +
                         "' does not parse: " + e.what());
    }
  }
  return out;
}

AugmentedPair make_variant(const ParsedReaction& reaction, int root) {
  const MolGraph& product = reaction.product.graph;
  const WriteResult rooted = write_rooted(product, root);

  AugmentedPair pair;
  pair.product_variant = rooted.smiles;

  // Product traversal position by map number.
  std::unordered_map<int, int> map_to_position;
  for (std::size_t pos = 0; pos < rooted.visit_order.size(); ++pos) {
    const Atom& atom = product.atoms[rooted.visit_order[pos]];
    if (atom.map_number) map_to_position.emplace(*atom.map_number, static_cast<int>(pos));
  }

  const std::optional<int> root_map = product.atoms[root].map_number;
  int lead_part = -1;
  if (root_map) {
    for (std::size_t p = 0; p < reaction.reactant_parts.size(); ++p) {
      for (const Atom& atom : reaction.reactant_parts[p].graph.atoms)
        if (atom.map_number == root_map) {
          lead_part = static_cast<int>(p);
          break;
        }
      if (lead_part >= 0) break;
    }
  }

  if (lead_part < 0) {
    // No usable alignment for this root; keep the reactants untouched.
    pair.mapping_incomplete = true;
    std::string joined;
    for (std::size_t p = 0; p < reaction.reactant_texts.size(); ++p) {
      if (p) joined += '.';
      joined += reaction.reactant_texts[p];
    }
    pair.reactants_variant = joined;
    return pair;
  }

  // Re-root each mapped reactant at the atom aligned with the earliest
  // product traversal position it contains; unmapped parts stay verbatim.
  std::vector<std::string> parts(reaction.reactant_parts.size());
  for (std::size_t p = 0; p < reaction.reactant_parts.size(); ++p) {
    const MolGraph& g = reaction.reactant_parts[p].graph;
    int best_atom = -1;
    int best_position = std::numeric_limits<int>::max();
    for (std::size_t a = 0; a < g.atoms.size(); ++a) {
      if (!g.atoms[a].map_number) continue;
      auto it = map_to_position.find(*g.atoms[a].map_number);
      if (it == map_to_position.end()) continue;
      if (it->second < best_position) {
        best_position = it->second;
        best_atom = static_cast<int>(a);
      }
    }
    parts[p] = best_atom < 0 ? reaction.reactant_texts[p] : write(g, best_atom);
  }

  std::string joined = parts[lead_part];
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (static_cast<int>(p) == lead_part) continue;
    joined += '.';
    joined += parts[p];
  }
  pair.reactants_variant = joined;
  return pair;
}

std::vector<AugmentedPair> enumerate_pair(const ReactionRecord& record, int n,
                                          std::uint64_t seed) {
  if (n < 1) throw AugmentError("enumerate_pair: n must be >= 1");
  const ParsedReaction reaction = parse_reaction(record);

  std::vector<AugmentedPair> out;
  out.reserve(n);
  AugmentedPair original;
  original.product_variant = record.product;
  original.reactants_variant = record.reactants;
  original.origin_id = record.id;
  original.variant_index = 0;
  out.push_back(original);

  std::unordered_set<std::string> seen;
  seen.insert(record.product + ">>" + record.reactants);

  Rng rng(seed);
  const auto atom_count = static_cast<std::uint64_t>(reaction.product.graph.atoms.size());
  for (int k = 1; k < n; ++k) {
    AugmentedPair pair;
    for (int attempt = 0; attempt <= 8; ++attempt) {
      const int root = static_cast<int>(rng.bounded(atom_count));
      pair = make_variant(reaction, root);
      const std::string key = pair.product_variant + ">>" + pair.reactants_variant;
      if (seen.insert(key).second) break;  // fresh variant
    }
    pair.origin_id = record.id;
    pair.variant_index = k;
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<AugmentedPair> augment_dataset(const std::vector<ReactionRecord>& records,
                                           int factor, std::uint64_t seed) {
  if (factor < 1) throw AugmentError("augment_dataset: factor must be >= 1");
  std::vector<AugmentedPair> out;
  out.reserve(records.size() * static_cast<std::size_t>(factor));
  for (const auto& record : records) {
    if (record.split == Split::Valid || record.split == Split::Test)
      throw SplitViolation("augment_dataset: record " + record.id + " is tagged " +
                           to_string(record.split) + "; only training data may be augmented");
    const std::uint64_t record_seed = splitmix64(seed ^ fnv1a64(record.id));
    auto pairs = enumerate_pair(record, factor, record_seed);
    out.insert(out.end(), std::make_move_iterator(pairs.begin()),
               std::make_move_iterator(pairs.end()));
  }
  return out;
}

}  // namespace retro
