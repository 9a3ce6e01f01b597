// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "retro/smiles.hpp"

namespace retro {

// Labeled-graph isomorphism test. Exact backtracking search when both graphs
// have at most `brute_force_limit` atoms; sorted label/degree and edge-label
// multiset comparison (plus a short Weisfeiler-Lehman refinement) above that,
// which can in principle report false positives on adversarial inputs.
// Atom labels are (element, aromatic, charge, isotope, explicit H) and,
// when include_maps is set, the atom-map number; edge labels are bond orders.
bool graphs_isomorphic(const MolGraph& a, const MolGraph& b, bool include_maps = false,
                       int brute_force_limit = 12);

// Label fingerprint usable for bucketing molecules before matching.
std::uint64_t graph_invariant_hash(const MolGraph& g, bool include_maps = false);

}  // namespace retro
