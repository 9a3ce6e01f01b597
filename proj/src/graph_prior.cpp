// SPDX-License-Identifier: Apache-2.0
#include "retro/graph_prior.hpp"

#include <cmath>
#include <deque>
#include <unordered_map>

namespace retro {

DistanceMatrix all_pairs_distance(const MolGraph& graph) {
  const int n = static_cast<int>(graph.atoms.size());
  DistanceMatrix result;
  result.d = Eigen::MatrixXi::Constant(n, n, kUnreachable);
  const auto adj = graph.adjacency();

  std::vector<int> queue;
  queue.reserve(n);
  for (int source = 0; source < n; ++source) {
    queue.clear();
    queue.push_back(source);
    result.d(source, source) = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      int u = queue[head];
      int du = result.d(source, u);
      for (int v : adj[u]) {
        if (result.d(source, v) != kUnreachable) continue;
        result.d(source, v) = du + 1;
        queue.push_back(v);
      }
    }
  }
  return result;
}

HopMasks hop_masks(const DistanceMatrix& dist) {
  HopMasks masks;
  for (int hop = 1; hop <= kMaxHop; ++hop)
    masks.m[hop - 1] = (dist.d.array() == hop).cast<int>().matrix();
  return masks;
}

IntraBias intra_bias(const TokenSequence& seq, const DistanceMatrix& dist,
                     const IntraBiasConfig& cfg) {
  const int atoms = seq.atom_count();
  if (atoms != dist.atoms())
    throw ShapeMismatch("intra_bias: token sequence has " + std::to_string(atoms) +
                        " atoms but distance matrix has " + std::to_string(dist.atoms()));

  const int tokens = static_cast<int>(seq.tokens.size());
  IntraBias bias;
  bias.mode = cfg.mode;
  bias.weights = cfg.weights;
  bias.sigma = cfg.sigma;
  bias.lambda_intra = cfg.lambda;
  bias.b = Eigen::MatrixXd::Zero(tokens, tokens);
  if (cfg.mode == BiasMode::Off) return bias;

  for (int i = 0; i < tokens; ++i) {
    if (!seq.tokens[i].atom_index) continue;
    const int ai = *seq.tokens[i].atom_index;
    for (int j = 0; j < tokens; ++j) {
      if (!seq.tokens[j].atom_index) continue;
      const int aj = *seq.tokens[j].atom_index;
      const int d = dist.d(ai, aj);
      if (d == kUnreachable) continue;
      if (cfg.mode == BiasMode::Gaussian) {
        bias.b(i, j) = std::exp(-static_cast<double>(d) * d / (2.0 * cfg.sigma * cfg.sigma));
      } else {
        if (d >= 1 && d <= kMaxHop) bias.b(i, j) = cfg.weights[d - 1];
      }
    }
  }
  return bias;
}

namespace {

// map number -> token position of the atom that carries it
std::unordered_map<int, int> map_positions(const ParsedMol& mol, const char* side) {
  std::unordered_map<int, int> out;
  const auto& tokens = mol.tokens.tokens;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    if (!tokens[pos].atom_index) continue;
    const Atom& atom = mol.graph.atoms[*tokens[pos].atom_index];
    if (!atom.map_number) continue;
    auto [it, inserted] = out.emplace(*atom.map_number, static_cast<int>(pos));
    if (!inserted)
      throw DuplicateMapNumber(std::string("cross_alignment: map number ") +
                               std::to_string(*atom.map_number) + " appears twice on the " +
                               side + " side");
  }
  return out;
}

}  // namespace

CrossAlignment cross_alignment(const ParsedMol& product, const ParsedMol& reactants,
                               double lambda_cross) {
  const auto product_maps = map_positions(product, "product");
  const auto reactant_maps = map_positions(reactants, "reactant");

  CrossAlignment alignment;
  alignment.lambda_cross = lambda_cross;
  alignment.b = Eigen::MatrixXd::Zero(static_cast<int>(product.tokens.tokens.size()),
                                      static_cast<int>(reactants.tokens.tokens.size()));
  for (const auto& [map_number, product_pos] : product_maps) {
    auto it = reactant_maps.find(map_number);
    if (it == reactant_maps.end()) continue;
    alignment.b(product_pos, it->second) = 1.0;
  }
  return alignment;
}

}  // namespace retro
