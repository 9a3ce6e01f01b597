// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace retro {

enum class TokenKind { Atom, BracketAtom, Bond, BranchOpen, BranchClose, RingClosure, Dot };

struct Token {
  std::string text;
  TokenKind kind;
  std::optional<int> atom_index;  // set iff kind is Atom or BracketAtom
};

struct TokenSequence {
  std::vector<Token> tokens;
  std::string source;

  int atom_count() const;
  // Token position of the k-th atom, in atom_index order.
  std::vector<int> atom_token_positions() const;
};

enum class BondOrder { Single, Double, Triple, Aromatic };

struct Atom {
  std::string element;  // symbol as written ("C", "Cl", "c")
  bool aromatic = false;
  int charge = 0;
  std::optional<int> map_number;
  std::optional<int> explicit_h;  // bracket atoms carry an explicit count (0 when omitted)
  std::optional<int> isotope;
};

struct Bond {
  int a;
  int b;
  BondOrder order;
};

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  // Connectivity components, each a sorted atom-index list; components are
  // ordered by their smallest member.
  std::vector<std::vector<int>> components;

  std::vector<std::vector<int>> adjacency() const;  // neighbor atom indices
};

enum class SmilesErrorCode {
  UnbalancedBracket,
  IllegalCharacter,
  UnmatchedRingClosure,
  UnbalancedParenthesis,
  DanglingBond,
  EmptyGraph,
  EmptyInput,
};

class SmilesError : public std::runtime_error {
 public:
  SmilesError(SmilesErrorCode code, std::size_t position, const std::string& message);

  SmilesErrorCode code() const { return code_; }
  std::size_t position() const { return position_; }

 private:
  SmilesErrorCode code_;
  std::size_t position_;
};

const char* to_string(SmilesErrorCode code);

// True for a recognized periodic-table symbol after case normalization.
bool is_element_symbol(std::string_view symbol);

// Splits a SMILES string into tokens covering every byte of the input.
// Bracket atoms, two-letter organic-subset elements and %nn ring closures
// are single tokens. Throws SmilesError (UnbalancedBracket, IllegalCharacter).
TokenSequence tokenize(std::string_view smiles);

// Concatenation of token texts; detokenize(tokenize(s)) == s.
std::string detokenize(const TokenSequence& seq);

struct ParsedMol {
  MolGraph graph;
  TokenSequence tokens;  // atom_index fields index graph.atoms
};

// Tokenizes and builds the molecular graph. Implicit hydrogens are not
// nodes; stereo tokens are kept as text but carry no graph semantics.
// Throws SmilesError.
ParsedMol parse(std::string_view smiles);

// Non-throwing variant for untrusted candidate strings.
std::optional<ParsedMol> try_parse(std::string_view smiles) noexcept;

struct WriteResult {
  std::string smiles;
  std::vector<int> visit_order;  // original atom indices in output order
};

// Serializes the graph as SMILES. The component containing `root` is written
// first, depth-first from `root`; neighbors are visited in ascending
// (bond order rank, original atom index) order. Remaining components follow
// in ascending smallest-atom-index order, rooted at that smallest atom.
// Throws SmilesError (EmptyGraph) and std::out_of_range for a bad root.
WriteResult write_rooted(const MolGraph& graph, int root);
std::string write(const MolGraph& graph, int root);

}  // namespace retro
