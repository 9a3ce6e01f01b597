// SPDX-License-Identifier: Apache-2.0
#include "retro/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace retro {

namespace {

const std::unordered_set<std::string>& element_table() {
  static const std::unordered_set<std::string> table = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si",
      "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni",
      "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo",
      "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba",
      "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
      "Lu", "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
      "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf",
      "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
      "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
  return table;
}

std::string normalize_case(std::string_view symbol) {
  std::string out(symbol);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  for (std::size_t i = 1; i < out.size(); ++i)
    out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

// Organic-subset symbols that may appear outside brackets.
bool organic_two_letter(char a, char b) { return (a == 'C' && b == 'l') || (a == 'B' && b == 'r'); }

bool organic_one_letter(char c) {
  switch (c) {
    case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
    case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
      return true;
    default:
      return false;
  }
}

[[noreturn]] void fail(SmilesErrorCode code, std::size_t pos, const std::string& message) {
  throw SmilesError(code, pos, message);
}

// Validates the inside of a bracket atom and extracts its fields.
// Grammar: '[' isotope? symbol chiral? hcount? charge? map? ']'
Atom parse_bracket_atom(std::string_view body, std::size_t bracket_pos) {
  Atom atom;
  std::size_t i = 0;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) fail(SmilesErrorCode::IllegalCharacter, bracket_pos + 1 + i, what);
  };

  std::size_t iso_start = i;
  while (i < body.size() && is_digit(body[i])) ++i;
  if (i > iso_start) atom.isotope = std::stoi(std::string(body.substr(iso_start, i - iso_start)));

  need(i < body.size() && (is_upper(body[i]) || is_lower(body[i])), "expected element symbol");
  std::size_t sym_start = i;
  ++i;
  if (i < body.size() && is_lower(body[i]) && is_element_symbol(body.substr(sym_start, 2))) ++i;
  std::string symbol(body.substr(sym_start, i - sym_start));
  need(is_element_symbol(symbol), "unknown element '" + symbol + "'");
  atom.element = symbol;
  atom.aromatic = is_lower(symbol[0]);

  // Chirality markers are accepted and discarded.
  while (i < body.size() && body[i] == '@') ++i;

  atom.explicit_h = 0;
  if (i < body.size() && body[i] == 'H') {
    ++i;
    int count = 1;
    if (i < body.size() && is_digit(body[i])) {
      std::size_t h_start = i;
      while (i < body.size() && is_digit(body[i])) ++i;
      count = std::stoi(std::string(body.substr(h_start, i - h_start)));
    }
    atom.explicit_h = count;
  }

  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    char sign = body[i];
    int magnitude = 0;
    while (i < body.size() && body[i] == sign) {
      ++magnitude;
      ++i;
    }
    if (magnitude == 1 && i < body.size() && is_digit(body[i])) {
      std::size_t c_start = i;
      while (i < body.size() && is_digit(body[i])) ++i;
      magnitude = std::stoi(std::string(body.substr(c_start, i - c_start)));
    }
    atom.charge = sign == '+' ? magnitude : -magnitude;
  }

  if (i < body.size() && body[i] == ':') {
    ++i;
    need(i < body.size() && is_digit(body[i]), "expected map number after ':'");
    std::size_t m_start = i;
    while (i < body.size() && is_digit(body[i])) ++i;
    atom.map_number = std::stoi(std::string(body.substr(m_start, i - m_start)));
  }

  need(i == body.size(), "unexpected character in bracket atom");
  return atom;
}

BondOrder bond_order_from_char(char c) {
  switch (c) {
    case '=': return BondOrder::Double;
    case '#': return BondOrder::Triple;
    case ':': return BondOrder::Aromatic;
    default: return BondOrder::Single;  // '-', '/', '\\'
  }
}

int bond_rank(BondOrder order) { return static_cast<int>(order); }

char bond_symbol(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return '-';
    case BondOrder::Double: return '=';
    case BondOrder::Triple: return '#';
    case BondOrder::Aromatic: return ':';
  }
  return '-';
}

BondOrder default_bond_order(const Atom& a, const Atom& b) {
  return (a.aromatic && b.aromatic) ? BondOrder::Aromatic : BondOrder::Single;
}

// True when the bond between a and b can be left implicit in SMILES text.
bool bond_implicit(BondOrder order, const Atom& a, const Atom& b) {
  if (order == BondOrder::Single) return !(a.aromatic && b.aromatic);
  if (order == BondOrder::Aromatic) return a.aromatic && b.aromatic;
  return false;
}

std::vector<std::vector<int>> compute_components(const std::vector<Atom>& atoms,
                                                 const std::vector<Bond>& bonds) {
  const int n = static_cast<int>(atoms.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& bond : bonds) {
    int ra = find(bond.a), rb = find(bond.b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::vector<int>> by_root(n);
  for (int i = 0; i < n; ++i) by_root[find(i)].push_back(i);
  std::vector<std::vector<int>> components;
  for (int i = 0; i < n; ++i)
    if (!by_root[i].empty()) components.push_back(std::move(by_root[i]));
  return components;
}

}  // namespace

SmilesError::SmilesError(SmilesErrorCode code, std::size_t position, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + " at position " +
                         std::to_string(position) + ": " + message),
      code_(code),
      position_(position) {}

const char* to_string(SmilesErrorCode code) {
  switch (code) {
    case SmilesErrorCode::UnbalancedBracket: return "UnbalancedBracket";
    case SmilesErrorCode::IllegalCharacter: return "IllegalCharacter";
    case SmilesErrorCode::UnmatchedRingClosure: return "UnmatchedRingClosure";
    case SmilesErrorCode::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case SmilesErrorCode::DanglingBond: return "DanglingBond";
    case SmilesErrorCode::EmptyGraph: return "EmptyGraph";
    case SmilesErrorCode::EmptyInput: return "EmptyInput";
  }
  return "SmilesError";
}

bool is_element_symbol(std::string_view symbol) {
  if (symbol.empty() || symbol.size() > 2) return false;
  return element_table().count(normalize_case(symbol)) > 0;
}

int TokenSequence::atom_count() const {
  int count = 0;
  for (const auto& t : tokens)
    if (t.atom_index) ++count;
  return count;
}

std::vector<int> TokenSequence::atom_token_positions() const {
  std::vector<int> positions(atom_count(), -1);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].atom_index) positions[*tokens[i].atom_index] = static_cast<int>(i);
  return positions;
}

std::vector<std::vector<int>> MolGraph::adjacency() const {
  std::vector<std::vector<int>> adj(atoms.size());
  for (const auto& bond : bonds) {
    adj[bond.a].push_back(bond.b);
    adj[bond.b].push_back(bond.a);
  }
  return adj;
}

TokenSequence tokenize(std::string_view smiles) {
  std::size_t begin = 0, end = smiles.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(smiles[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(smiles[end - 1]))) --end;
  std::string_view s = smiles.substr(begin, end - begin);

  if (s.empty()) fail(SmilesErrorCode::EmptyInput, 0, "empty SMILES");

  TokenSequence seq;
  seq.source = std::string(s);
  int next_atom = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '[') {
      std::size_t close = s.find(']', i);
      if (close == std::string_view::npos)
        fail(SmilesErrorCode::UnbalancedBracket, i, "unclosed '['");
      parse_bracket_atom(s.substr(i + 1, close - i - 1), i);  // validate eagerly
      seq.tokens.push_back(
          {std::string(s.substr(i, close - i + 1)), TokenKind::BracketAtom, next_atom++});
      i = close + 1;
    } else if (c == ']') {
      fail(SmilesErrorCode::UnbalancedBracket, i, "']' without matching '['");
    } else if (is_upper(c) || is_lower(c)) {
      if (i + 1 < s.size() && organic_two_letter(c, s[i + 1])) {
        seq.tokens.push_back({std::string(s.substr(i, 2)), TokenKind::Atom, next_atom++});
        i += 2;
      } else if (organic_one_letter(c)) {
        seq.tokens.push_back({std::string(1, c), TokenKind::Atom, next_atom++});
        ++i;
      } else {
        fail(SmilesErrorCode::IllegalCharacter, i,
             std::string("'") + c + "' is not an organic-subset symbol outside brackets");
      }
    } else if (is_digit(c)) {
      seq.tokens.push_back({std::string(1, c), TokenKind::RingClosure, std::nullopt});
      ++i;
    } else if (c == '%') {
      if (i + 2 >= s.size() || !is_digit(s[i + 1]) || !is_digit(s[i + 2]))
        fail(SmilesErrorCode::IllegalCharacter, i, "'%' must be followed by two digits");
      seq.tokens.push_back({std::string(s.substr(i, 3)), TokenKind::RingClosure, std::nullopt});
      i += 3;
    } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
      seq.tokens.push_back({std::string(1, c), TokenKind::Bond, std::nullopt});
      ++i;
    } else if (c == '(') {
      seq.tokens.push_back({"(", TokenKind::BranchOpen, std::nullopt});
      ++i;
    } else if (c == ')') {
      seq.tokens.push_back({")", TokenKind::BranchClose, std::nullopt});
      ++i;
    } else if (c == '.') {
      seq.tokens.push_back({".", TokenKind::Dot, std::nullopt});
      ++i;
    } else {
      fail(SmilesErrorCode::IllegalCharacter, i,
           std::string("byte '") + c + "' is outside the SMILES alphabet");
    }
  }
  return seq;
}

std::string detokenize(const TokenSequence& seq) {
  std::string out;
  for (const auto& t : seq.tokens) out += t.text;
  return out;
}

namespace {

struct RingOpening {
  int atom;
  std::optional<BondOrder> order;
  std::size_t token_pos;
};

}  // namespace

ParsedMol parse(std::string_view smiles) {
  ParsedMol result;
  result.tokens = tokenize(smiles);

  MolGraph& graph = result.graph;
  int prev_atom = -1;
  std::optional<BondOrder> pending;
  std::size_t pending_pos = 0;
  std::vector<int> branch_stack;
  std::unordered_map<int, RingOpening> open_rings;

  auto add_bond = [&](int a, int b, BondOrder order, std::size_t pos) {
    if (a == b)
      fail(SmilesErrorCode::UnmatchedRingClosure, pos, "ring bond from an atom to itself");
    for (const auto& bond : graph.bonds)
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
        fail(SmilesErrorCode::UnmatchedRingClosure, pos, "duplicate bond between one atom pair");
    graph.bonds.push_back({a, b, order});
  };

  std::size_t char_pos = 0;
  for (const Token& token : result.tokens.tokens) {
    const std::size_t pos = char_pos;
    char_pos += token.text.size();
    switch (token.kind) {
      case TokenKind::Atom:
      case TokenKind::BracketAtom: {
        Atom atom;
        if (token.kind == TokenKind::Atom) {
          atom.element = token.text;
          atom.aromatic = is_lower(token.text[0]);
        } else {
          atom = parse_bracket_atom(
              std::string_view(token.text).substr(1, token.text.size() - 2), pos);
        }
        int index = *token.atom_index;
        graph.atoms.push_back(atom);
        if (prev_atom >= 0) {
          BondOrder order =
              pending ? *pending : default_bond_order(graph.atoms[prev_atom], graph.atoms[index]);
          add_bond(prev_atom, index, order, pos);
        }
        pending.reset();
        prev_atom = index;
        break;
      }
      case TokenKind::Bond: {
        if (pending) fail(SmilesErrorCode::DanglingBond, pending_pos, "consecutive bond symbols");
        if (prev_atom < 0)
          fail(SmilesErrorCode::DanglingBond, pos, "bond symbol with no preceding atom");
        pending = bond_order_from_char(token.text[0]);
        pending_pos = pos;
        break;
      }
      case TokenKind::BranchOpen: {
        if (pending) fail(SmilesErrorCode::DanglingBond, pending_pos, "bond symbol before '('");
        if (prev_atom < 0)
          fail(SmilesErrorCode::UnbalancedParenthesis, pos, "'(' with no preceding atom");
        branch_stack.push_back(prev_atom);
        break;
      }
      case TokenKind::BranchClose: {
        if (pending) fail(SmilesErrorCode::DanglingBond, pending_pos, "bond symbol before ')'");
        if (branch_stack.empty())
          fail(SmilesErrorCode::UnbalancedParenthesis, pos, "')' without matching '('");
        prev_atom = branch_stack.back();
        branch_stack.pop_back();
        break;
      }
      case TokenKind::RingClosure: {
        if (prev_atom < 0)
          fail(SmilesErrorCode::UnmatchedRingClosure, pos, "ring closure with no preceding atom");
        int number =
            token.text[0] == '%' ? std::stoi(token.text.substr(1)) : token.text[0] - '0';
        auto it = open_rings.find(number);
        if (it == open_rings.end()) {
          open_rings.emplace(number, RingOpening{prev_atom, pending, pos});
        } else {
          RingOpening opening = it->second;
          open_rings.erase(it);
          if (opening.order && pending && *opening.order != *pending)
            fail(SmilesErrorCode::UnmatchedRingClosure, pos,
                 "conflicting bond orders on ring closure " + std::to_string(number));
          BondOrder order = pending          ? *pending
                            : opening.order ? *opening.order
                                            : default_bond_order(graph.atoms[opening.atom],
                                                                 graph.atoms[prev_atom]);
          add_bond(opening.atom, prev_atom, order, pos);
        }
        pending.reset();
        break;
      }
      case TokenKind::Dot: {
        if (pending) fail(SmilesErrorCode::DanglingBond, pending_pos, "bond symbol before '.'");
        prev_atom = -1;
        break;
      }
    }
  }

  if (pending) fail(SmilesErrorCode::DanglingBond, pending_pos, "trailing bond symbol");
  if (!branch_stack.empty())
    fail(SmilesErrorCode::UnbalancedParenthesis, char_pos, "unclosed '('");
  if (!open_rings.empty()) {
    const auto& opening = open_rings.begin()->second;
    fail(SmilesErrorCode::UnmatchedRingClosure, opening.token_pos,
         "ring closure " + std::to_string(open_rings.begin()->first) + " never closed");
  }

  graph.components = compute_components(graph.atoms, graph.bonds);
  return result;
}

std::optional<ParsedMol> try_parse(std::string_view smiles) noexcept {
  try {
    return parse(smiles);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

namespace {

std::string atom_text(const Atom& atom) {
  const std::string& symbol = atom.element;
  const bool organic = symbol.size() == 1
                           ? organic_one_letter(symbol[0])
                           : symbol.size() == 2 && organic_two_letter(symbol[0], symbol[1]);
  if (organic && !atom.isotope && atom.charge == 0 && !atom.map_number && !atom.explicit_h)
    return symbol;

  std::string out = "[";
  if (atom.isotope) out += std::to_string(*atom.isotope);
  out += symbol;
  if (atom.explicit_h && *atom.explicit_h > 0) {
    out += 'H';
    if (*atom.explicit_h > 1) out += std::to_string(*atom.explicit_h);
  }
  if (atom.charge != 0) {
    out += atom.charge > 0 ? '+' : '-';
    int magnitude = std::abs(atom.charge);
    if (magnitude > 1) out += std::to_string(magnitude);
  }
  if (atom.map_number) {
    out += ':';
    out += std::to_string(*atom.map_number);
  }
  out += ']';
  return out;
}

std::string ring_label(int number) {
  return number <= 9 ? std::to_string(number) : "%" + std::to_string(number);
}

// Serializer state for one write_rooted call. A planning DFS fixes the
// spanning tree and back edges; emission replays the identical traversal.
struct Writer {
  const MolGraph& graph;
  std::vector<std::vector<std::pair<int, BondOrder>>> neighbors;
  std::vector<bool> planned;
  std::vector<bool> visited;
  std::vector<std::vector<std::pair<int, BondOrder>>> ring_partners;
  std::unordered_set<long long> ring_edges;
  std::vector<bool> digit_in_use;
  std::unordered_map<long long, int> edge_digit;
  std::string out;
  std::vector<int> visit_order;

  explicit Writer(const MolGraph& g) : graph(g) {
    neighbors.resize(g.atoms.size());
    for (const auto& bond : g.bonds) {
      neighbors[bond.a].push_back({bond.b, bond.order});
      neighbors[bond.b].push_back({bond.a, bond.order});
    }
    for (auto& list : neighbors)
      std::sort(list.begin(), list.end(), [](const auto& x, const auto& y) {
        if (bond_rank(x.second) != bond_rank(y.second))
          return bond_rank(x.second) < bond_rank(y.second);
        return x.first < y.first;
      });
    planned.assign(g.atoms.size(), false);
    visited.assign(g.atoms.size(), false);
    ring_partners.resize(g.atoms.size());
    digit_in_use.assign(100, false);
  }

  static long long edge_key(int a, int b) {
    return static_cast<long long>(std::min(a, b)) * 1000000 + std::max(a, b);
  }

  int take_digit(int atom_a, int atom_b) {
    for (int d = 1; d < 100; ++d)
      if (!digit_in_use[d]) {
        digit_in_use[d] = true;
        return d;
      }
    fail(SmilesErrorCode::UnmatchedRingClosure, 0,
         "more than 99 concurrent ring closures between atoms " + std::to_string(atom_a) +
             " and " + std::to_string(atom_b));
  }

  void plan(int atom, int parent) {
    planned[atom] = true;
    for (const auto& [next, order] : neighbors[atom]) {
      if (next == parent) continue;
      if (planned[next]) {
        long long key = edge_key(atom, next);
        if (ring_edges.insert(key).second) {
          ring_partners[atom].push_back({next, order});
          ring_partners[next].push_back({atom, order});
        }
      } else {
        plan(next, atom);
      }
    }
  }

  bool is_ring_edge(int a, int b) const { return ring_edges.count(edge_key(a, b)) > 0; }

  void emit(int atom, int parent) {
    visited[atom] = true;
    visit_order.push_back(atom);
    out += atom_text(graph.atoms[atom]);

    auto partners = ring_partners[atom];
    std::sort(partners.begin(), partners.end(), [](const auto& x, const auto& y) {
      if (bond_rank(x.second) != bond_rank(y.second))
        return bond_rank(x.second) < bond_rank(y.second);
      return x.first < y.first;
    });
    for (const auto& [partner, order] : partners) {
      long long key = edge_key(atom, partner);
      auto it = edge_digit.find(key);
      int digit;
      if (it == edge_digit.end()) {
        digit = take_digit(atom, partner);
        edge_digit.emplace(key, digit);
      } else {
        digit = it->second;
        edge_digit.erase(it);
        digit_in_use[digit] = false;
      }
      if (!bond_implicit(order, graph.atoms[atom], graph.atoms[partner]))
        out += bond_symbol(order);
      out += ring_label(digit);
    }

    std::vector<std::pair<int, BondOrder>> children;
    for (const auto& [next, order] : neighbors[atom])
      if (next != parent && !is_ring_edge(atom, next)) children.push_back({next, order});
    for (std::size_t k = 0; k < children.size(); ++k) {
      const auto& [child, order] = children[k];
      const bool last = k + 1 == children.size();
      if (!last) out += '(';
      if (!bond_implicit(order, graph.atoms[atom], graph.atoms[child]))
        out += bond_symbol(order);
      emit(child, atom);
      if (!last) out += ')';
    }
  }

  void component(int root) {
    plan(root, -1);
    emit(root, -1);
  }
};

}  // namespace

WriteResult write_rooted(const MolGraph& graph, int root) {
  if (graph.atoms.empty()) fail(SmilesErrorCode::EmptyGraph, 0, "cannot write an empty graph");
  if (root < 0 || root >= static_cast<int>(graph.atoms.size()))
    throw std::out_of_range("write_rooted: root atom index out of range");

  Writer writer(graph);
  writer.component(root);

  const auto components = graph.components.empty()
                              ? compute_components(graph.atoms, graph.bonds)
                              : graph.components;
  for (const auto& component : components) {
    int head = component.front();
    if (writer.visited[head]) continue;
    writer.out += '.';
    writer.component(head);
  }

  return {std::move(writer.out), std::move(writer.visit_order)};
}

std::string write(const MolGraph& graph, int root) { return write_rooted(graph, root).smiles; }

}  // namespace retro
