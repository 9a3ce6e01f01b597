// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "retro/smiles.hpp"

namespace retro {

enum class Split { Unspecified, Train, Valid, Test };

const char* to_string(Split split);
std::optional<Split> split_from_string(const std::string& name);

struct ReactionRecord {
  std::string product;
  std::string reactants;  // '.'-joined molecules
  std::string id;
  std::optional<int> class_label;  // 1..10 when present
  Split split = Split::Unspecified;
};

struct AugmentedPair {
  std::string product_variant;
  std::string reactants_variant;
  std::string origin_id;
  int variant_index = 0;
  bool mapping_incomplete = false;  // re-rooted product only; reactants untouched
};

class AugmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseFailure : public AugmentError {
 public:
  using AugmentError::AugmentError;
};

class SplitViolation : public AugmentError {
 public:
  using AugmentError::AugmentError;
};

// Parsed, component-split view of one record, reused across variants.
struct ParsedReaction {
  ParsedMol product;
  std::vector<ParsedMol> reactant_parts;    // one per '.'-separated molecule
  std::vector<std::string> reactant_texts;  // original piece strings
};

// Throws ParseFailure when either side does not parse.
ParsedReaction parse_reaction(const ReactionRecord& record);

// Deterministic core of representation augmentation: re-serializes the
// product from `root`, moves the reactant containing the root's map number
// to the front, and re-roots every mapped reactant at its atom aligned with
// the earliest product traversal position. When the root carries no usable
// map, only the product is re-rooted (mapping_incomplete is set).
AugmentedPair make_variant(const ParsedReaction& reaction, int root);

// n pairs; pair 0 is the original record verbatim. Duplicate variants are
// redrawn up to 8 times, then emitted as-is.
std::vector<AugmentedPair> enumerate_pair(const ReactionRecord& record, int n,
                                          std::uint64_t seed);

// factor * |records| pairs, per-record seeds derived from `seed` and the
// record id. Records tagged valid/test raise SplitViolation.
std::vector<AugmentedPair> augment_dataset(const std::vector<ReactionRecord>& records,
                                           int factor, std::uint64_t seed);

}  // namespace retro
