// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "retro/augment.hpp"

namespace retro {

class UnreadableFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyAfterRejects : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RejectedLine {
  int line_number = 0;
  std::string reason;
  std::string text;
};

struct IngestResult {
  std::vector<ReactionRecord> records;
  std::vector<RejectedLine> rejects;
};

// One reaction per line: `reactants>>product`, optional tab-separated
// trailing columns (a single class label 1-10, or the variant_index /
// origin_id pair appended by the augment command). Lines starting with '#'
// are comments. The record id is the 1-based line number. Throws nothing;
// failures land in `reason`.
bool parse_reaction_line(const std::string& line, int line_number, ReactionRecord& record,
                         std::string& reason);

// Reads a reaction file; malformed lines are collected, valid ones become
// records. Throws UnreadableFile; EmptyAfterRejects when nothing survives.
IngestResult read_reaction_file(const std::string& path);

std::string reaction_line(const ReactionRecord& record);
void write_reaction_file(const std::string& path, const std::vector<ReactionRecord>& records);
void write_rejects_file(const std::string& path, const std::vector<RejectedLine>& rejects);

// Split assignment. The companion file holds `id<TAB>{train|valid|test}`
// lines; ids are input line numbers. Unlisted records stay Unspecified.
void apply_split_file(std::vector<ReactionRecord>& records, const std::string& path);

// Seeded shuffle, then ratio cut (counts rounded so they sum to the total).
void apply_ratio_split(std::vector<ReactionRecord>& records, int train_pct, int valid_pct,
                       int test_pct, std::uint64_t seed);

}  // namespace retro
