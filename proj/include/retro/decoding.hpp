// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "retro/augment.hpp"
#include "retro/model.hpp"

namespace retro {

class EmptyTestSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BeamParams {
  int width = 10;
  int max_len = 120;              // generated tokens, EOS included
  double length_norm_alpha = 0.6; // score = logprob / len^alpha
};

// Returns next-token logits given the prefix (BOS included).
using StepScorer = std::function<Eigen::VectorXd(const std::vector<int>& prefix)>;

struct ScoredCandidate {
  std::string smiles;
  std::vector<int> ids;  // generated tokens, EOS excluded
  double score = 0.0;    // length-normalized
  double logprob = 0.0;
  bool finished = false;
};

// Standard beam search over the scorer. Hypotheses finish on EOS; if none
// finishes within max_len, the unfinished survivors are returned flagged.
// Ranking: score descending, ties by lexicographic token ids. Exact
// duplicate strings (after detok) keep their best-scored copy. At most
// `width` candidates come back.
std::vector<ScoredCandidate> beam_search(
    const StepScorer& scorer, int vocab_size, const BeamParams& params,
    const std::function<std::string(const std::vector<int>&)>& detok);

// True iff candidate parses and its '.'-separated molecule multiset equals
// the truth's under graph isomorphism, atom maps ignored.
bool reactant_sets_match(const std::string& candidate, const std::string& truth);

// Ranked reactant candidates for one product.
class CandidateGenerator {
 public:
  virtual ~CandidateGenerator() = default;
  virtual std::vector<ScoredCandidate> generate(const std::string& product) const = 0;
};

// Beam search over a trained model: encodes the product with its intra
// prior, decodes with cross bias off.
class ModelPredictor : public CandidateGenerator {
 public:
  ModelPredictor(const Model& model, const Vocab& vocab, BeamParams params);
  std::vector<ScoredCandidate> generate(const std::string& product) const override;

 private:
  const Model& model_;
  const Vocab& vocab_;
  BeamParams params_;
};

inline constexpr std::array<int, 4> kTopK = {1, 3, 5, 10};

struct EvalReport {
  std::array<int, 4> hits = {0, 0, 0, 0};
  std::array<double, 4> accuracy = {0.0, 0.0, 0.0, 0.0};
  int records = 0;
  int total_candidates = 0;
  int invalid_candidates = 0;
  double invalid_rate = 0.0;
};

// Top-K over the first K deduplicated candidates per record. Unparseable or
// unfinished candidates count as invalid and never match.
EvalReport evaluate(const CandidateGenerator& generator,
                    const std::vector<ReactionRecord>& records);

// Aligned table plus a machine-readable key=value block.
std::string render_report(const EvalReport& report);

}  // namespace retro
