// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only to check the production
// code. These stay deliberately naive.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "retro/smiles.hpp"
#include "retro/tensor.hpp"

namespace retro::testing {

// Floyd-Warshall all-pairs shortest paths; -1 encodes unreachable.
inline Eigen::MatrixXi floyd_warshall(const MolGraph& g) {
  const int n = static_cast<int>(g.atoms.size());
  const int inf = std::numeric_limits<int>::max() / 4;
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) d(i, i) = 0;
  for (const auto& bond : g.bonds) {
    d(bond.a, bond.b) = 1;
    d(bond.b, bond.a) = 1;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d(i, k) + d(k, j) < d(i, j)) d(i, j) = d(i, k) + d(k, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (d(i, j) >= inf) d(i, j) = -1;
  return d;
}

// Central-difference gradient of `loss()` with respect to `param`.
// The loss closure must re-run the full forward pass.
inline Eigen::ArrayXd finite_difference_grad(Tensor param,
                                             const std::function<double()>& loss,
                                             double h = 1e-5) {
  Eigen::ArrayXd grad(param.size());
  for (Index i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + h;
    const double up = loss();
    param.data()[i] = saved - h;
    const double down = loss();
    param.data()[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// max_i |a-b| / max(1, |a|, |b|)
inline double max_relative_error(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace retro::testing
