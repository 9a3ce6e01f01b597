// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>

#include "retro/errors.hpp"
#include "retro/smiles.hpp"

namespace retro {

// Sentinel for atom pairs in different components.
inline constexpr int kUnreachable = -1;

struct DistanceMatrix {
  Eigen::MatrixXi d;  // A x A; kUnreachable across components

  int atoms() const { return static_cast<int>(d.rows()); }
  bool reachable(int i, int j) const { return d(i, j) != kUnreachable; }
};

struct HopMasks {
  // m[k] marks atom pairs at graph distance k+1, for hops 1..4.
  std::array<Eigen::MatrixXi, 4> m;
};

inline constexpr int kMaxHop = 4;

enum class BiasMode { HardWeighted, Gaussian, Off };

struct IntraBiasConfig {
  BiasMode mode = BiasMode::Gaussian;
  std::array<double, 4> weights = {1.0, 0.5, 0.25, 0.125};  // HardWeighted
  double sigma = 1.0;                                       // Gaussian
  double lambda = 1.0;
};

struct IntraBias {
  Eigen::MatrixXd b;  // T x T at token resolution, unscaled by lambda
  BiasMode mode;
  std::array<double, 4> weights;
  double sigma;
  double lambda_intra;
};

struct CrossAlignment {
  Eigen::MatrixXd b;  // T_product x T_reactants, binary
  double lambda_cross;
};

class DuplicateMapNumber : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Breadth-first shortest paths from every atom; each bond counts one hop.
DistanceMatrix all_pairs_distance(const MolGraph& graph);

// Indicator matrices for exact distances 1..4; everything else is zero.
HopMasks hop_masks(const DistanceMatrix& dist);

// Lifts the atom-level distance prior to token resolution. Entries touching
// a non-atom token are zero. The result is the bias before multiplication
// by lambda_intra; scaling happens where the bias enters the attention
// logits. Throws ShapeMismatch when seq and dist disagree on atom count.
IntraBias intra_bias(const TokenSequence& seq, const DistanceMatrix& dist,
                     const IntraBiasConfig& cfg);

// Binary token-level alignment: 1 where a product atom token and a reactant
// atom token carry the same map number. Throws DuplicateMapNumber if either
// side repeats a map number.
CrossAlignment cross_alignment(const ParsedMol& product, const ParsedMol& reactants,
                               double lambda_cross = 1.0);

}  // namespace retro
