// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "retro/graph_prior.hpp"
#include "test_util.hpp"

using namespace retro;

TEST_CASE("all_pairs_distance on a chain") {
  auto mol = parse("CCO");
  auto dist = all_pairs_distance(mol.graph);
  Eigen::MatrixXi expected(3, 3);
  expected << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  CHECK(dist.d == expected);
}

TEST_CASE("all_pairs_distance single atom") {
  auto mol = parse("C");
  auto dist = all_pairs_distance(mol.graph);
  CHECK(dist.d.rows() == 1);
  CHECK(dist.d(0, 0) == 0);
}

TEST_CASE("all_pairs_distance marks separate components unreachable") {
  auto mol = parse("CC.O");
  auto dist = all_pairs_distance(mol.graph);
  CHECK(dist.d(0, 2) == kUnreachable);
  CHECK(dist.d(1, 2) == kUnreachable);
  CHECK(dist.d(2, 0) == kUnreachable);
  CHECK(dist.d(0, 1) == 1);
}

TEST_CASE("all_pairs_distance matches Floyd-Warshall on random graphs") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    MolGraph g = testing::random_molgraph(rng, 10);
    auto dist = all_pairs_distance(g);
    CHECK(dist.d == testing::floyd_warshall(g));
  }
}

TEST_CASE("hop_masks mark exact distances") {
  auto mol = parse("CCO");
  auto masks = hop_masks(all_pairs_distance(mol.graph));
  CHECK(masks.m[0](0, 1) == 1);
  CHECK(masks.m[0](1, 0) == 1);
  CHECK(masks.m[0](1, 2) == 1);
  CHECK(masks.m[0](2, 1) == 1);
  CHECK(masks.m[0](0, 2) == 0);
  CHECK(masks.m[1](0, 2) == 1);
  CHECK(masks.m[1](2, 0) == 1);
  CHECK(masks.m[1](0, 1) == 0);
}

TEST_CASE("hop_masks on a single atom are all zero") {
  auto masks = hop_masks(all_pairs_distance(parse("C").graph));
  for (const auto& m : masks.m) CHECK(m.sum() == 0);
}

TEST_CASE("hop_masks exclude distances beyond four") {
  auto mol = parse("CCCCCC");  // path of six carbons
  auto masks = hop_masks(all_pairs_distance(mol.graph));
  CHECK(masks.m[3](0, 4) == 1);
  CHECK(masks.m[3](0, 5) == 0);  // distance 5
  for (const auto& m : masks.m) CHECK(m(0, 5) == 0);
}

TEST_CASE("hop_masks are disjoint, symmetric, zero-diagonal") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    MolGraph g = testing::random_molgraph(rng, 10);
    auto dist = all_pairs_distance(g);
    auto masks = hop_masks(dist);
    const int n = dist.atoms();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        int total = 0;
        for (int h = 0; h < 4; ++h) {
          total += masks.m[h](i, j);
          CHECK(masks.m[h](i, j) == masks.m[h](j, i));
          CHECK(masks.m[h](i, j) == (dist.d(i, j) == h + 1 ? 1 : 0));
        }
        CHECK(total <= 1);
        if (i == j)
          for (int h = 0; h < 4; ++h) CHECK(masks.m[h](i, i) == 0);
      }
  }
}

TEST_CASE("gaussian intra bias evaluates the kernel at token resolution") {
  auto mol = parse("CCO");
  auto dist = all_pairs_distance(mol.graph);
  IntraBiasConfig cfg;
  cfg.mode = BiasMode::Gaussian;
  cfg.sigma = 1.0;
  auto bias = intra_bias(mol.tokens, dist, cfg);
  CHECK(bias.b(0, 0) == doctest::Approx(1.0).epsilon(1e-15));            // D = 0
  CHECK(bias.b(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15)); // D = 1
  CHECK(bias.b(0, 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15)); // D = 2
  CHECK(bias.b(0, 2) == doctest::Approx(0.135335).epsilon(1e-5));
}

TEST_CASE("gaussian bias is zero across components and on non-atom tokens") {
  auto mol = parse("CC(=O)O.O");
  auto dist = all_pairs_distance(mol.graph);
  IntraBiasConfig cfg;
  cfg.mode = BiasMode::Gaussian;
  auto bias = intra_bias(mol.tokens, dist, cfg);
  // Token 3 is '=', token 2 is '('.
  for (int j = 0; j < bias.b.cols(); ++j) {
    CHECK(bias.b(2, j) == 0.0);
    CHECK(bias.b(3, j) == 0.0);
    CHECK(bias.b(j, 2) == 0.0);
  }
  // Last token is the disconnected O; first token is C in the other component.
  const int last = static_cast<int>(bias.b.rows()) - 1;
  CHECK(bias.b(0, last) == 0.0);
  CHECK(bias.b(last, last) == 1.0);  // its own diagonal survives
}

TEST_CASE("hard-weighted bias with w=(1,0,0,0) reproduces the one-hop mask") {
  auto mol = parse("CC(=O)O");
  auto dist = all_pairs_distance(mol.graph);
  auto masks = hop_masks(dist);
  IntraBiasConfig cfg;
  cfg.mode = BiasMode::HardWeighted;
  cfg.weights = {1.0, 0.0, 0.0, 0.0};
  auto bias = intra_bias(mol.tokens, dist, cfg);
  auto positions = mol.tokens.atom_token_positions();
  const int atoms = mol.tokens.atom_count();
  for (int i = 0; i < atoms; ++i)
    for (int j = 0; j < atoms; ++j)
      CHECK(bias.b(positions[i], positions[j]) == static_cast<double>(masks.m[0](i, j)));
}

TEST_CASE("gaussian bias is monotone in distance and concentrates as sigma shrinks") {
  auto mol = parse("CCCCCCC");
  auto dist = all_pairs_distance(mol.graph);
  IntraBiasConfig cfg;
  cfg.mode = BiasMode::Gaussian;
  for (double sigma : {0.3, 1.0, 2.5}) {
    cfg.sigma = sigma;
    auto bias = intra_bias(mol.tokens, dist, cfg);
    for (int j = 1; j < 7; ++j) CHECK(bias.b(0, j) <= bias.b(0, j - 1));
  }
  cfg.sigma = 0.05;
  auto sharp = intra_bias(mol.tokens, dist, cfg);
  CHECK(sharp.b(0, 0) == 1.0);
  for (int j = 1; j < 7; ++j) CHECK(sharp.b(0, j) < 1e-80);
}

TEST_CASE("intra_bias rejects mismatched inputs") {
  auto mol = parse("CCO");
  auto other = parse("CCCC");
  auto dist = all_pairs_distance(other.graph);
  CHECK_THROWS_AS(intra_bias(mol.tokens, dist, IntraBiasConfig{}), ShapeMismatch);
}

TEST_CASE("intra_bias off mode returns an all-zero matrix") {
  auto mol = parse("CCO");
  auto dist = all_pairs_distance(mol.graph);
  IntraBiasConfig cfg;
  cfg.mode = BiasMode::Off;
  auto bias = intra_bias(mol.tokens, dist, cfg);
  CHECK(bias.b.cwiseAbs().sum() == 0.0);
}

TEST_CASE("cross_alignment marks mapped token pairs") {
  auto product = parse("[CH3:1][OH:2]");
  auto reactants = parse("[CH3:1]Br.[OH:2]");
  auto alignment = cross_alignment(product, reactants);
  CHECK(alignment.b.rows() == 2);
  CHECK(alignment.b.cols() == 4);  // [CH3:1], Br, '.', [OH:2]
  CHECK(alignment.b.sum() == 2.0);
  CHECK(alignment.b(0, 0) == 1.0);
  CHECK(alignment.b(1, 3) == 1.0);
}

TEST_CASE("cross_alignment with no maps is all zero") {
  auto alignment = cross_alignment(parse("CCO"), parse("CC.O"));
  CHECK(alignment.b.sum() == 0.0);
}

TEST_CASE("cross_alignment with disjoint maps is all zero") {
  auto alignment = cross_alignment(parse("[CH3:1]O"), parse("[CH3:2]O"));
  CHECK(alignment.b.sum() == 0.0);
}

TEST_CASE("cross_alignment rejects duplicate maps on one side") {
  auto product = parse("[CH3:1][CH3:1]");
  auto reactants = parse("[CH3:1]Br");
  CHECK_THROWS_AS(cross_alignment(product, reactants), DuplicateMapNumber);
}

TEST_CASE("cross_alignment rows and columns sum to at most one") {
  auto product = parse("[CH3:1][O:2][CH2:3]C");
  auto reactants = parse("[CH3:1][OH:2].Br[CH2:3]C");
  auto alignment = cross_alignment(product, reactants);
  for (int i = 0; i < alignment.b.rows(); ++i) {
    const double row = alignment.b.row(i).sum();
    CHECK(row >= 0.0);
    CHECK(row <= 1.0);
  }
  for (int j = 0; j < alignment.b.cols(); ++j) {
    const double col = alignment.b.col(j).sum();
    CHECK(col >= 0.0);
    CHECK(col <= 1.0);
  }
}
