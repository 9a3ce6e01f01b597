// SPDX-License-Identifier: Apache-2.0
#include "retro/reaction_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "retro/rng.hpp"

namespace retro {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return s.substr(b, e - b);
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoi(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

// Validates both sides and the map-number contract.
bool validate_reaction(ReactionRecord& record, std::string& reason) {
  ParsedMol product, reactants;
  try {
    product = parse(record.product);
  } catch (const SmilesError& e) {
    reason = std::string(to_string(e.code())) + " in product: " + e.what();
    return false;
  }
  try {
    reactants = parse(record.reactants);
  } catch (const SmilesError& e) {
    reason = std::string(to_string(e.code())) + " in reactants: " + e.what();
    return false;
  }

  std::unordered_set<int> product_maps;
  for (const Atom& atom : product.graph.atoms)
    if (atom.map_number && !product_maps.insert(*atom.map_number).second) {
      reason = "DuplicateMapNumber " + std::to_string(*atom.map_number) + " in product";
      return false;
    }
  std::unordered_map<int, int> reactant_maps;
  for (const Atom& atom : reactants.graph.atoms)
    if (atom.map_number && ++reactant_maps[*atom.map_number] > 1) {
      reason = "DuplicateMapNumber " + std::to_string(*atom.map_number) + " in reactants";
      return false;
    }
  for (int map_number : product_maps)
    if (!reactant_maps.count(map_number)) {
      reason = "MappingIncomplete: product map " + std::to_string(map_number) +
               " missing from reactants";
      return false;
    }
  return true;
}

}  // namespace

bool parse_reaction_line(const std::string& line, int line_number, ReactionRecord& record,
                         std::string& reason) {
  const auto columns = split_tabs(strip(line));
  const std::string& body = columns[0];
  const auto sep = body.find(">>");
  if (sep == std::string::npos) {
    reason = "missing '>>' separator";
    return false;
  }
  if (body.find(">>", sep + 2) != std::string::npos) {
    reason = "more than one '>>' separator";
    return false;
  }

  record = ReactionRecord{};
  record.reactants = strip(body.substr(0, sep));
  record.product = strip(body.substr(sep + 2));
  record.id = std::to_string(line_number);
  if (record.reactants.empty() || record.product.empty()) {
    reason = "empty reaction side";
    return false;
  }

  if (columns.size() == 2) {
    int label = 0;
    if (!parse_int(columns[1], label) || label < 1 || label > 10) {
      reason = "class label must be an integer in 1..10, got '" + columns[1] + "'";
      return false;
    }
    record.class_label = label;
  } else if (columns.size() == 3) {
    int variant = 0;
    if (!parse_int(columns[1], variant) || variant < 0) {
      reason = "variant_index column must be a non-negative integer";
      return false;
    }
    // origin_id column is informational; the line number remains the id.
  } else if (columns.size() > 3) {
    reason = "too many columns";
    return false;
  }

  return validate_reaction(record, reason);
}

IngestResult read_reaction_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UnreadableFile("cannot open reaction file: " + path);

  IngestResult result;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#') continue;
    ReactionRecord record;
    std::string reason;
    if (parse_reaction_line(text, line_number, record, reason))
      result.records.push_back(std::move(record));
    else
      result.rejects.push_back({line_number, std::move(reason), text});
  }
  if (result.records.empty())
    throw EmptyAfterRejects("no usable reactions in " + path + " (" +
                            std::to_string(result.rejects.size()) + " rejected)");
  return result;
}

std::string reaction_line(const ReactionRecord& record) {
  std::string out = record.reactants + ">>" + record.product;
  if (record.class_label) out += "\t" + std::to_string(*record.class_label);
  return out;
}

void write_reaction_file(const std::string& path, const std::vector<ReactionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UnreadableFile("cannot open for writing: " + path);
  for (const auto& record : records) out << reaction_line(record) << "\n";
  if (!out) throw UnreadableFile("write failed: " + path);
}

void write_rejects_file(const std::string& path, const std::vector<RejectedLine>& rejects) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UnreadableFile("cannot open for writing: " + path);
  for (const auto& reject : rejects)
    out << reject.line_number << "\t" << reject.reason << "\t" << reject.text << "\n";
}

void apply_split_file(std::vector<ReactionRecord>& records, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UnreadableFile("cannot open split file: " + path);
  std::map<std::string, Split> assignment;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#') continue;
    const auto columns = split_tabs(text);
    if (columns.size() != 2)
      throw UnreadableFile(path + ":" + std::to_string(line_number) +
                           ": expected 'id<TAB>split'");
    const auto split = split_from_string(columns[1]);
    if (!split)
      throw UnreadableFile(path + ":" + std::to_string(line_number) + ": unknown split '" +
                           columns[1] + "'");
    assignment[columns[0]] = *split;
  }
  for (auto& record : records) {
    auto it = assignment.find(record.id);
    if (it != assignment.end()) record.split = it->second;
  }
}

void apply_ratio_split(std::vector<ReactionRecord>& records, int train_pct, int valid_pct,
                       int test_pct, std::uint64_t seed) {
  if (train_pct < 0 || valid_pct < 0 || test_pct < 0 ||
      train_pct + valid_pct + test_pct != 100)
    throw std::invalid_argument("split ratios must be non-negative and sum to 100");

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  const std::size_t n = records.size();
  const std::size_t n_train = n * static_cast<std::size_t>(train_pct) / 100;
  const std::size_t n_valid = n * static_cast<std::size_t>(valid_pct) / 100;
  for (std::size_t i = 0; i < n; ++i) {
    Split split = Split::Test;
    if (i < n_train)
      split = Split::Train;
    else if (i < n_train + n_valid)
      split = Split::Valid;
    records[order[i]].split = split;
  }
}

}  // namespace retro
