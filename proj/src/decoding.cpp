// SPDX-License-Identifier: Apache-2.0
#include "retro/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "retro/isomorphism.hpp"

namespace retro {

namespace {

struct Hypothesis {
  std::vector<int> ids;  // generated tokens (no BOS); EOS excluded
  double logprob = 0.0;
  bool finished = false;
};

double normalized(double logprob, std::size_t len, double alpha) {
  const double n = std::max<std::size_t>(len, 1);
  return logprob / std::pow(n, alpha);
}

bool rank_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ids < b.ids;  // lexicographic token-id tie break
}

Eigen::ArrayXd log_softmax(const Eigen::VectorXd& logits) {
  Eigen::ArrayXd x = logits.array();
  const double m = x.maxCoeff();
  return x - (m + std::log((x - m).exp().sum()));
}

}  // namespace

std::vector<ScoredCandidate> beam_search(
    const StepScorer& scorer, int vocab_size, const BeamParams& params,
    const std::function<std::string(const std::vector<int>&)>& detok) {
  std::vector<Hypothesis> alive{Hypothesis{}};
  std::vector<ScoredCandidate> done;

  for (int t = 0; t < params.max_len && !alive.empty(); ++t) {
    // EOS continuations compete for beam slots like any other token; the
    // ones that survive the cut retire to the done pool.
    std::vector<Hypothesis> expanded;
    expanded.reserve(alive.size() * static_cast<std::size_t>(vocab_size));
    for (const Hypothesis& hyp : alive) {
      std::vector<int> prefix;
      prefix.reserve(hyp.ids.size() + 1);
      prefix.push_back(Vocab::kBos);
      prefix.insert(prefix.end(), hyp.ids.begin(), hyp.ids.end());
      const Eigen::ArrayXd logp = log_softmax(scorer(prefix));
      for (int token = 0; token < vocab_size; ++token) {
        if (token == Vocab::kPad || token == Vocab::kBos) continue;
        Hypothesis next = hyp;
        next.logprob += logp[token];
        next.finished = token == Vocab::kEos;
        if (!next.finished) next.ids.push_back(token);
        expanded.push_back(std::move(next));
      }
    }
    std::sort(expanded.begin(), expanded.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      if (a.finished != b.finished) return a.finished;  // EOS is the smaller id
      return a.ids < b.ids;
    });
    if (static_cast<int>(expanded.size()) > params.width) expanded.resize(params.width);

    alive.clear();
    for (Hypothesis& hyp : expanded) {
      if (hyp.finished) {
        ScoredCandidate candidate;
        candidate.ids = hyp.ids;
        candidate.logprob = hyp.logprob;
        // EOS counts toward the generated length.
        candidate.score =
            normalized(hyp.logprob, hyp.ids.size() + 1, params.length_norm_alpha);
        candidate.finished = true;
        done.push_back(std::move(candidate));
      } else {
        alive.push_back(std::move(hyp));
      }
    }
  }

  if (done.empty()) {
    // NoFinishedHypothesis: surface the unfinished survivors, flagged.
    for (const Hypothesis& hyp : alive) {
      ScoredCandidate candidate;
      candidate.ids = hyp.ids;
      candidate.logprob = hyp.logprob;
      candidate.score = normalized(hyp.logprob, hyp.ids.size(), params.length_norm_alpha);
      candidate.finished = false;
      done.push_back(std::move(candidate));
    }
  }

  std::sort(done.begin(), done.end(), rank_before);

  // Deduplicate exact strings, keeping the best-ranked copy.
  std::vector<ScoredCandidate> out;
  std::unordered_map<std::string, bool> seen;
  for (auto& candidate : done) {
    candidate.smiles = detok(candidate.ids);
    if (seen.emplace(candidate.smiles, true).second) out.push_back(std::move(candidate));
    if (static_cast<int>(out.size()) >= params.width) break;
  }
  return out;
}

namespace {

std::vector<MolGraph> component_graphs(const MolGraph& g) {
  std::vector<MolGraph> out;
  for (const auto& component : g.components) {
    MolGraph sub;
    std::unordered_map<int, int> remap;
    for (int atom : component) {
      remap[atom] = static_cast<int>(sub.atoms.size());
      Atom copy = g.atoms[atom];
      copy.map_number.reset();  // maps are stripped before comparison
      sub.atoms.push_back(copy);
    }
    for (const auto& bond : g.bonds) {
      auto a = remap.find(bond.a);
      if (a == remap.end()) continue;
      auto b = remap.find(bond.b);
      if (b == remap.end()) continue;
      sub.bonds.push_back({a->second, b->second, bond.order});
    }
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace

bool reactant_sets_match(const std::string& candidate, const std::string& truth) {
  const ParsedMol truth_mol = parse(truth);
  const auto parsed = try_parse(candidate);
  if (!parsed) return false;

  std::vector<MolGraph> want = component_graphs(truth_mol.graph);
  std::vector<MolGraph> have = component_graphs(parsed->graph);
  if (want.size() != have.size()) return false;

  // Isomorphism is an equivalence, so greedy matching is exact here.
  std::vector<bool> used(want.size(), false);
  for (const auto& mol : have) {
    bool matched = false;
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (used[i]) continue;
      if (graphs_isomorphic(mol, want[i], false)) {
        used[i] = true;
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

ModelPredictor::ModelPredictor(const Model& model, const Vocab& vocab, BeamParams params)
    : model_(model), vocab_(vocab), params_(params) {}

std::vector<ScoredCandidate> ModelPredictor::generate(const std::string& product) const {
  const ParsedMol parsed = parse(product);
  const AttentionBiasBundle bundle = build_bias_bundle(model_.config(), parsed, nullptr);
  const std::vector<int> src = vocab_.encode(parsed.tokens);
  const Tensor memory = model_.encode(src, bundle);

  StepScorer scorer = [&](const std::vector<int>& prefix) {
    return model_.decode_step(memory, prefix, bundle);
  };
  auto detok = [this](const std::vector<int>& ids) { return vocab_.decode(ids); };
  return beam_search(scorer, vocab_.size(), params_, detok);
}

EvalReport evaluate(const CandidateGenerator& generator,
                    const std::vector<ReactionRecord>& records) {
  if (records.empty()) throw EmptyTestSet("evaluate: no test records");

  EvalReport report;
  report.records = static_cast<int>(records.size());
  for (const auto& record : records) {
    const auto candidates = generator.generate(record.product);
    report.total_candidates += static_cast<int>(candidates.size());

    int first_match = -1;
    for (std::size_t rank = 0; rank < candidates.size(); ++rank) {
      const auto& candidate = candidates[rank];
      const bool valid = candidate.finished && try_parse(candidate.smiles).has_value();
      if (!valid) {
        ++report.invalid_candidates;
        continue;
      }
      if (first_match < 0 && reactant_sets_match(candidate.smiles, record.reactants))
        first_match = static_cast<int>(rank);
    }
    if (first_match >= 0)
      for (std::size_t k = 0; k < kTopK.size(); ++k)
        if (first_match < kTopK[k]) ++report.hits[k];
  }
  for (std::size_t k = 0; k < kTopK.size(); ++k)
    report.accuracy[k] = static_cast<double>(report.hits[k]) / report.records;
  report.invalid_rate = report.total_candidates == 0
                            ? 0.0
                            : static_cast<double>(report.invalid_candidates) /
                                  report.total_candidates;
  return report;
}

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  out << "  K   hits   accuracy\n";
  char line[64];
  for (std::size_t k = 0; k < kTopK.size(); ++k) {
    std::snprintf(line, sizeof(line), "%3d   %4d   %8.4f\n", kTopK[k], report.hits[k],
                  report.accuracy[k]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "records: %d  invalid rate: %.4f\n", report.records,
                report.invalid_rate);
  out << line;
  out << "\n";
  out << "records = " << report.records << "\n";
  for (std::size_t k = 0; k < kTopK.size(); ++k) {
    out << "top" << kTopK[k] << "_hits = " << report.hits[k] << "\n";
    out << "top" << kTopK[k] << "_accuracy = " << report.accuracy[k] << "\n";
  }
  out << "total_candidates = " << report.total_candidates << "\n";
  out << "invalid_candidates = " << report.invalid_candidates << "\n";
  out << "invalid_rate = " << report.invalid_rate << "\n";
  return out.str();
}

}  // namespace retro
