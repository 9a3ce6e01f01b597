// SPDX-License-Identifier: Apache-2.0
#include "retro/isomorphism.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "retro/rng.hpp"

namespace retro {

namespace {

std::string normalized_element(const Atom& atom) {
  std::string out = atom.element;
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z')
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::string atom_label(const Atom& atom, bool include_maps) {
  std::string label = normalized_element(atom);
  label += atom.aromatic ? "~" : "";
  label += "|c" + std::to_string(atom.charge);
  label += "|i" + std::to_string(atom.isotope.value_or(0));
  label += "|h" + std::to_string(atom.explicit_h.value_or(-1));
  if (include_maps) label += "|m" + std::to_string(atom.map_number.value_or(0));
  return label;
}

struct LabeledView {
  std::vector<std::string> labels;
  std::vector<std::vector<std::pair<int, BondOrder>>> adj;

  LabeledView(const MolGraph& g, bool include_maps) {
    labels.reserve(g.atoms.size());
    for (const auto& atom : g.atoms) labels.push_back(atom_label(atom, include_maps));
    adj.resize(g.atoms.size());
    for (const auto& bond : g.bonds) {
      adj[bond.a].push_back({bond.b, bond.order});
      adj[bond.b].push_back({bond.a, bond.order});
    }
  }
};

bool multisets_equal(std::vector<std::string> a, std::vector<std::string> b) {
  if (a.size() != b.size()) return false;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::vector<std::string> degree_label_multiset(const LabeledView& v) {
  std::vector<std::string> out;
  out.reserve(v.labels.size());
  for (std::size_t i = 0; i < v.labels.size(); ++i)
    out.push_back(v.labels[i] + "#d" + std::to_string(v.adj[i].size()));
  return out;
}

std::vector<std::string> edge_label_multiset(const MolGraph& g, bool include_maps) {
  std::vector<std::string> out;
  out.reserve(g.bonds.size());
  for (const auto& bond : g.bonds) {
    std::string la = atom_label(g.atoms[bond.a], include_maps);
    std::string lb = atom_label(g.atoms[bond.b], include_maps);
    if (lb < la) std::swap(la, lb);
    out.push_back(la + "=" + std::to_string(static_cast<int>(bond.order)) + "=" + lb);
  }
  return out;
}

// Two rounds of Weisfeiler-Lehman color refinement, returning the sorted
// color multiset. Pure invariant; collisions only merge, never split.
std::vector<std::uint64_t> wl_colors(const LabeledView& v, int rounds) {
  std::vector<std::uint64_t> color(v.labels.size());
  for (std::size_t i = 0; i < v.labels.size(); ++i) color[i] = fnv1a64(v.labels[i]);
  for (int r = 0; r < rounds; ++r) {
    std::vector<std::uint64_t> next(color.size());
    for (std::size_t i = 0; i < color.size(); ++i) {
      std::vector<std::uint64_t> sig;
      sig.reserve(v.adj[i].size());
      for (const auto& [j, order] : v.adj[i])
        sig.push_back(splitmix64(color[j] * 4 + static_cast<std::uint64_t>(order)));
      std::sort(sig.begin(), sig.end());
      std::uint64_t h = splitmix64(color[i]);
      for (auto s : sig) h = splitmix64(h ^ s);
      next[i] = h;
    }
    color = std::move(next);
  }
  std::sort(color.begin(), color.end());
  return color;
}

// Backtracking search for a label- and bond-preserving bijection.
struct BruteMatcher {
  const LabeledView& a;
  const LabeledView& b;
  std::vector<int> a_to_b;
  std::vector<int> b_to_a;
  std::vector<int> order;  // a's atoms, connectivity-first

  BruteMatcher(const LabeledView& va, const LabeledView& vb) : a(va), b(vb) {
    const int n = static_cast<int>(a.labels.size());
    a_to_b.assign(n, -1);
    b_to_a.assign(n, -1);
    // Visit a's atoms so each one (when possible) touches an already-placed
    // neighbor; this makes the adjacency check prune early.
    std::vector<bool> placed(n, false);
    for (int start = 0; start < n; ++start) {
      if (placed[start]) continue;
      std::vector<int> stack{start};
      placed[start] = true;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        order.push_back(u);
        for (const auto& [w, ord] : a.adj[u])
          if (!placed[w]) {
            placed[w] = true;
            stack.push_back(w);
          }
      }
    }
  }

  bool feasible(int u, int v) const {
    if (a.labels[u] != b.labels[v]) return false;
    if (a.adj[u].size() != b.adj[v].size()) return false;
    // Every placed neighbor of u must map onto a matching-order neighbor of v.
    for (const auto& [w, ord] : a.adj[u]) {
      int mapped = a_to_b[w];
      if (mapped < 0) continue;
      bool found = false;
      for (const auto& [x, ord2] : b.adj[v])
        if (x == mapped && ord2 == ord) {
          found = true;
          break;
        }
      if (!found) return false;
    }
    // And symmetrically: placed neighbors of v must be neighbors of u.
    for (const auto& [x, ord2] : b.adj[v]) {
      int mapped = b_to_a[x];
      if (mapped < 0) continue;
      bool found = false;
      for (const auto& [w, ord] : a.adj[u])
        if (w == mapped && ord == ord2) {
          found = true;
          break;
        }
      if (!found) return false;
    }
    return true;
  }

  bool search(std::size_t depth) {
    if (depth == order.size()) return true;
    int u = order[depth];
    for (int v = 0; v < static_cast<int>(b.labels.size()); ++v) {
      if (b_to_a[v] >= 0) continue;
      if (!feasible(u, v)) continue;
      a_to_b[u] = v;
      b_to_a[v] = u;
      if (search(depth + 1)) return true;
      a_to_b[u] = -1;
      b_to_a[v] = -1;
    }
    return false;
  }
};

}  // namespace

bool graphs_isomorphic(const MolGraph& a, const MolGraph& b, bool include_maps,
                       int brute_force_limit) {
  if (a.atoms.size() != b.atoms.size() || a.bonds.size() != b.bonds.size()) return false;

  LabeledView va(a, include_maps), vb(b, include_maps);
  if (!multisets_equal(degree_label_multiset(va), degree_label_multiset(vb))) return false;
  if (!multisets_equal(edge_label_multiset(a, include_maps),
                       edge_label_multiset(b, include_maps)))
    return false;

  const int n = static_cast<int>(a.atoms.size());
  if (n <= brute_force_limit) {
    BruteMatcher matcher(va, vb);
    return matcher.search(0);
  }
  return wl_colors(va, 2) == wl_colors(vb, 2);
}

std::uint64_t graph_invariant_hash(const MolGraph& g, bool include_maps) {
  LabeledView v(g, include_maps);
  std::uint64_t h = splitmix64(g.atoms.size() * 1315423911ULL + g.bonds.size());
  auto nodes = degree_label_multiset(v);
  std::sort(nodes.begin(), nodes.end());
  for (const auto& s : nodes) h = splitmix64(h ^ fnv1a64(s));
  auto edges = edge_label_multiset(g, include_maps);
  std::sort(edges.begin(), edges.end());
  for (const auto& s : edges) h = splitmix64(h ^ fnv1a64(s));
  for (auto c : wl_colors(v, 2)) h = splitmix64(h ^ c);
  return h;
}

}  // namespace retro
