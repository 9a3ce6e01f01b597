// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
// Run with no arguments for all criteria, or list criterion numbers.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "retro/augment.hpp"
#include "retro/checkpoint.hpp"
#include "retro/decoding.hpp"
#include "retro/graph_prior.hpp"
#include "retro/isomorphism.hpp"
#include "retro/reaction_io.hpp"
#include "retro/training.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace retro;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kDataDir = std::string(RETRO_SOURCE_DIR) + "/data";

int g_failures = 0;

void report(int number, const std::string& name, bool ok, double seconds,
            const std::string& detail = "") {
  std::printf("%s  %2d  %-38s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
              seconds, detail.empty() ? "" : "  ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

struct Criterion {
  int number;
  std::string name;
  std::function<bool(std::string&)> run;
};

std::vector<std::string> corpus_lines() {
  std::ifstream in(kDataDir + "/corpus_smiles.txt");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

// ---- 1: parser round trip over the bundled corpus -------------------------

bool criterion_parser(std::string& detail) {
  const auto corpus = corpus_lines();
  if (corpus.size() < 500) {
    detail = "corpus has only " + std::to_string(corpus.size()) + " strings";
    return false;
  }
  int checked_rewrites = 0;
  for (const auto& s : corpus) {
    if (detokenize(tokenize(s)) != s) {
      detail = "tokenize round trip failed on " + s;
      return false;
    }
    const ParsedMol mol = parse(s);
    if (mol.tokens.atom_count() != static_cast<int>(mol.graph.atoms.size())) {
      detail = "atom-token count mismatch on " + s;
      return false;
    }
    const int atoms = static_cast<int>(mol.graph.atoms.size());
    const int stride = atoms <= 12 ? 1 : std::max(1, atoms / 3);
    for (int root = 0; root < atoms; root += stride) {
      const std::string rewritten = write(mol.graph, root);
      const ParsedMol back = parse(rewritten);
      if (!graphs_isomorphic(mol.graph, back.graph, true)) {
        detail = "re-serialization not isomorphic: " + s + " root " + std::to_string(root);
        return false;
      }
      ++checked_rewrites;
    }
  }
  detail = std::to_string(corpus.size()) + " strings, " + std::to_string(checked_rewrites) +
           " rewrites";
  return true;
}

// ---- 2: graph-prior oracle -------------------------------------------------

bool criterion_prior_oracle(std::string& detail) {
  Rng rng(20260809);
  for (int trial = 0; trial < 1000; ++trial) {
    MolGraph g = testing::random_molgraph(rng, 10);
    const DistanceMatrix dist = all_pairs_distance(g);
    if (dist.d != testing::floyd_warshall(g)) {
      detail = "distance mismatch at trial " + std::to_string(trial);
      return false;
    }
    const HopMasks masks = hop_masks(dist);
    const int n = dist.atoms();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        int total = 0;
        for (int h = 0; h < 4; ++h) {
          total += masks.m[h](i, j);
          if (masks.m[h](i, j) != (dist.d(i, j) == h + 1 ? 1 : 0)) {
            detail = "hop mask definition violated";
            return false;
          }
        }
        if (total > 1) {
          detail = "hop masks overlap";
          return false;
        }
      }
  }

  // Gaussian bias against direct formula evaluation at token resolution.
  for (const char* s : {"CC(=O)Oc1ccccc1", "C1CC1.CCO", "[CH3:1][O:2][CH2:3]C"}) {
    const ParsedMol mol = parse(s);
    const DistanceMatrix dist = all_pairs_distance(mol.graph);
    for (double sigma : {0.5, 1.0, 2.0}) {
      IntraBiasConfig cfg;
      cfg.mode = BiasMode::Gaussian;
      cfg.sigma = sigma;
      const IntraBias bias = intra_bias(mol.tokens, dist, cfg);
      const auto& tokens = mol.tokens.tokens;
      for (std::size_t i = 0; i < tokens.size(); ++i)
        for (std::size_t j = 0; j < tokens.size(); ++j) {
          double expected = 0.0;
          if (tokens[i].atom_index && tokens[j].atom_index) {
            const int d = dist.d(*tokens[i].atom_index, *tokens[j].atom_index);
            if (d != kUnreachable)
              expected = std::exp(-static_cast<double>(d) * d / (2.0 * sigma * sigma));
          }
          if (std::abs(bias.b(i, j) - expected) > 1e-12) {
            detail = "gaussian bias deviates from the formula";
            return false;
          }
        }
    }
  }
  detail = "1000 graphs";
  return true;
}

// ---- 3: vanilla reduction (bitwise) ----------------------------------------

ModelConfig tiny_config(int vocab) {
  ModelConfig cfg;
  cfg.layers_enc = 2;
  cfg.layers_dec = 2;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.dropout = 0.0;
  cfg.max_relative_distance = 4;
  cfg.vocab_size = vocab;
  return cfg;
}

std::vector<int> random_ids(Rng& rng, int len, int vocab) {
  std::vector<int> ids(len);
  for (auto& id : ids) id = 4 + static_cast<int>(rng.bounded(vocab - 4));
  return ids;
}

bool bitwise_equal(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool criterion_vanilla_reduction(std::string& detail) {
  ModelConfig gaussian_cfg = tiny_config(20);
  gaussian_cfg.bias_mode = BiasMode::Gaussian;
  gaussian_cfg.lambda_intra = 0.0;
  gaussian_cfg.lambda_cross = 0.0;
  ModelConfig off_cfg = gaussian_cfg;
  off_cfg.bias_mode = BiasMode::Off;

  Model biased = Model::init(gaussian_cfg, 11);
  Model plain(off_cfg, biased.params().clone());
  // Zero the relative-position tables in both builds.
  for (auto& models : {&biased, &plain})
    for (auto& [name, tensor] : models->params().named())
      if (name.find(".rel") != std::string::npos) tensor.data().setZero();

  Rng rng(313);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<int> src = random_ids(rng, 3 + static_cast<int>(rng.bounded(8)), 20);
    std::vector<int> tgt = random_ids(rng, 2 + static_cast<int>(rng.bounded(8)), 20);
    tgt.insert(tgt.begin(), Vocab::kBos);

    AttentionBiasBundle bundle;  // lambdas are zero: bias paths skipped
    const Tensor mem_a = biased.encode(src, bundle);
    const Tensor mem_b = plain.encode(src, bundle);
    if (!bitwise_equal(mem_a.data(), mem_b.data())) {
      detail = "encoder memories differ at trial " + std::to_string(trial);
      return false;
    }
    const Tensor dec_a = biased.decode(mem_a, tgt, bundle);
    const Tensor dec_b = plain.decode(mem_b, tgt, bundle);
    if (!bitwise_equal(dec_a.data(), dec_b.data())) {
      detail = "decoder logits differ at trial " + std::to_string(trial);
      return false;
    }
  }
  detail = "100 inputs bitwise equal";
  return true;
}

// ---- 4: end-to-end gradient check ------------------------------------------

bool criterion_gradient_check(std::string& detail) {
  ModelConfig cfg = tiny_config(20);
  cfg.bias_mode = BiasMode::Gaussian;
  cfg.lambda_intra = 0.7;
  cfg.lambda_cross = 0.4;
  Model model = Model::init(cfg, 4242);

  const ParsedMol product = parse("[CH3:1][O:2][CH2:3]C");
  const ParsedMol reactants = parse("[CH3:1][OH:2].Br[CH2:3]C");
  const AttentionBiasBundle bundle = build_bias_bundle(cfg, product, &reactants);
  const int src_len = static_cast<int>(product.tokens.tokens.size());
  const int tgt_len = static_cast<int>(reactants.tokens.tokens.size());

  Rng rng(77);
  double worst = 0.0;
  for (int batch = 0; batch < 5; ++batch) {
    const std::vector<int> src = random_ids(rng, src_len, 20);
    std::vector<int> targets = random_ids(rng, tgt_len, 20);
    targets.push_back(Vocab::kEos);
    std::vector<int> tgt_in = {Vocab::kBos};
    tgt_in.insert(tgt_in.end(), targets.begin(), targets.end() - 1);

    auto forward = [&]() -> double {
      const Tensor memory = model.encode(src, bundle);
      const Tensor logits = model.decode(memory, tgt_in, bundle);
      return cross_entropy(logits, targets, Vocab::kPad).item();
    };

    model.params().zero_grads();
    {
      Tape tape;
      const Tensor memory = model.encode(src, bundle);
      const Tensor logits = model.decode(memory, tgt_in, bundle);
      backward(cross_entropy(logits, targets, Vocab::kPad));
    }
    for (const auto& [name, tensor] : model.params().named()) {
      if (!tensor.has_grad()) {
        detail = "no gradient reached " + name;
        return false;
      }
      const Eigen::ArrayXd numeric = testing::finite_difference_grad(tensor, forward);
      const double err = testing::max_relative_error(tensor.grad(), numeric);
      worst = std::max(worst, err);
      if (err > 1e-3) {
        detail = name + " off by " + std::to_string(err);
        return false;
      }
    }
  }
  std::ostringstream note;
  note.precision(2);
  note << "5 batches, worst rel err " << worst;
  detail = note.str();
  return true;
}

// ---- 5: decoder causality (bitwise) ----------------------------------------

bool criterion_causality(std::string& detail) {
  ModelConfig cfg = tiny_config(20);
  cfg.lambda_intra = 1.0;
  Model model = Model::init(cfg, 5);
  const ParsedMol product = parse("CCOC(C)=O");
  const AttentionBiasBundle bundle = build_bias_bundle(cfg, product, nullptr);

  Rng rng(99);
  const std::vector<int> src =
      random_ids(rng, static_cast<int>(product.tokens.tokens.size()), 20);
  const Tensor memory = model.encode(src, bundle);

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> tgt = random_ids(rng, 9, 20);
    tgt.insert(tgt.begin(), Vocab::kBos);
    const Tensor base = model.decode(memory, tgt, bundle);
    const Index vocab = base.dim(1);

    const int t = 1 + static_cast<int>(rng.bounded(8));
    std::vector<int> perturbed = tgt;
    for (std::size_t j = t + 1; j < perturbed.size(); ++j)
      perturbed[j] = 4 + static_cast<int>(rng.bounded(16));
    const Tensor out = model.decode(memory, perturbed, bundle);
    for (Index row = 0; row <= t; ++row)
      if (std::memcmp(base.data().data() + row * vocab, out.data().data() + row * vocab,
                      sizeof(double) * vocab) != 0) {
        detail = "logits row " + std::to_string(row) + " changed at trial " +
                 std::to_string(trial);
        return false;
      }
  }
  detail = "100 trials bitwise";
  return true;
}

// ---- 6: beam search equals exhaustive enumeration --------------------------

bool criterion_beam_exhaustive(std::string& detail) {
  // Three emittable symbols (EOS, UNK, one letter): vocab ids 0..4.
  const int vocab = 5;
  BeamParams params;
  params.width = 27;
  params.max_len = 3;
  params.length_norm_alpha = 0.0;  // rank by raw model probability

  auto detok = [](const std::vector<int>& ids) {
    std::string s;
    for (int id : ids) s += static_cast<char>('a' + id);
    return s;
  };

  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    ModelConfig cfg = tiny_config(vocab);
    cfg.layers_enc = 1;
    cfg.layers_dec = 1;
    Model model = Model::init(cfg, 1000 + draw);
    AttentionBiasBundle bundle;
    Rng rng(500 + draw);
    const std::vector<int> src = random_ids(rng, 4, vocab);
    const Tensor memory = model.encode(src, bundle);

    StepScorer scorer = [&](const std::vector<int>& prefix) {
      return model.decode_step(memory, prefix, bundle);
    };

    // Enumerate every EOS-terminated sequence of up to max_len tokens.
    std::vector<ScoredCandidate> oracle;
    std::vector<int> ids;
    std::function<void(double)> recurse = [&](double logprob) {
      std::vector<int> prefix = {Vocab::kBos};
      prefix.insert(prefix.end(), ids.begin(), ids.end());
      Eigen::ArrayXd x = scorer(prefix).array();
      const double m = x.maxCoeff();
      const Eigen::ArrayXd logp = x - (m + std::log((x - m).exp().sum()));

      ScoredCandidate c;
      c.ids = ids;
      c.logprob = logprob + logp[Vocab::kEos];
      c.score = c.logprob;
      c.finished = true;
      oracle.push_back(c);
      if (static_cast<int>(ids.size()) + 1 >= params.max_len) return;
      for (int token = 3; token < vocab; ++token) {
        ids.push_back(token);
        recurse(logprob + logp[token]);
        ids.pop_back();
      }
    };
    recurse(0.0);
    std::sort(oracle.begin(), oracle.end(),
              [](const ScoredCandidate& a, const ScoredCandidate& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.ids < b.ids;
              });

    const auto beam = beam_search(scorer, vocab, params, detok);
    if (beam.size() != oracle.size()) {
      detail = "draw " + std::to_string(draw) + ": beam returned " +
               std::to_string(beam.size()) + " of " + std::to_string(oracle.size());
      return false;
    }
    for (std::size_t i = 0; i < beam.size(); ++i)
      if (beam[i].ids != oracle[i].ids ||
          std::abs(beam[i].score - oracle[i].score) > 1e-12) {
        detail = "draw " + std::to_string(draw) + ": rank " + std::to_string(i) + " differs";
        return false;
      }
  }
  detail = "20 parameter draws";
  return true;
}

// ---- 7: overfit the bundled toy corpus -------------------------------------

bool criterion_overfit(std::string& detail) {
  const auto records = read_reaction_file(kDataDir + "/toy_reactions.txt").records;
  if (records.size() != 32) {
    detail = "expected 32 toy reactions, found " + std::to_string(records.size());
    return false;
  }

  ModelConfig cfg;
  cfg.layers_enc = 2;
  cfg.layers_dec = 2;
  cfg.heads = 4;
  cfg.d_model = 64;
  cfg.d_ff = 128;
  cfg.dropout = 0.0;
  cfg.max_relative_distance = 4;
  cfg.bias_mode = BiasMode::Gaussian;
  cfg.sigma = 1.0;
  cfg.lambda_intra = 1.0;
  cfg.lambda_cross = 1.0;

  TrainConfig tc;
  tc.batch_tokens = 700;
  tc.schedule_factor = 2.0;
  tc.warmup_steps = 200;
  tc.validate_every = 200;
  tc.patience = 40;
  tc.max_steps = 800;  // well under the 3000-step budget
  tc.seed = 1;

  const auto dataset = prepare_dataset(records, records, cfg);
  const std::string out_dir = "/tmp/retro_accept_overfit";
  fs::remove_all(out_dir);
  fs::create_directories(out_dir);
  const auto result = train(tc, cfg, dataset, out_dir);

  if (result.steps > 3000) {
    detail = "took " + std::to_string(result.steps) + " steps";
    return false;
  }
  if (result.last_valid_acc < 0.95) {
    detail = "top-1 exact match " + std::to_string(result.last_valid_acc) + " after " +
             std::to_string(result.steps) + " steps";
    return false;
  }
  std::ostringstream note;
  note << "exact match " << result.last_valid_acc << " after " << result.steps << " steps";
  detail = note.str();
  return true;
}

// ---- 8: augmentation contract ----------------------------------------------

bool criterion_augmentation(std::string& detail) {
  auto records = read_reaction_file(kDataDir + "/toy_reactions.txt").records;
  for (auto& record : records) record.split = Split::Train;

  const auto pairs = augment_dataset(records, 20, 2026);
  if (pairs.size() != records.size() * 20) {
    detail = "emitted " + std::to_string(pairs.size()) + " pairs";
    return false;
  }

  const auto rerun = augment_dataset(records, 20, 2026);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].product_variant != rerun[i].product_variant ||
        pairs[i].reactants_variant != rerun[i].reactants_variant) {
      detail = "rerun differs at pair " + std::to_string(i);
      return false;
    }

  std::size_t record_index = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0 && pairs[i].variant_index == 0) ++record_index;
    const auto& origin = records[record_index];
    const auto& pair = pairs[i];
    const MolGraph origin_product = parse(origin.product).graph;
    const MolGraph origin_reactants = parse(origin.reactants).graph;
    if (!graphs_isomorphic(parse(pair.product_variant).graph, origin_product, true) ||
        !graphs_isomorphic(parse(pair.reactants_variant).graph, origin_reactants, true)) {
      detail = "variant " + std::to_string(pair.variant_index) + " of record " + origin.id +
               " is not isomorphic to its origin";
      return false;
    }
    auto maps = [](const MolGraph& g) {
      std::multiset<int> out;
      for (const auto& atom : g.atoms)
        if (atom.map_number) out.insert(*atom.map_number);
      return out;
    };
    if (maps(parse(pair.product_variant).graph) != maps(origin_product) ||
        maps(parse(pair.reactants_variant).graph) != maps(origin_reactants)) {
      detail = "atom-map multiset changed on record " + origin.id;
      return false;
    }
  }
  detail = "640 pairs, isomorphic, reproducible";
  return true;
}

// ---- 9: metric monotonicity and the hand-built report ----------------------

class FixedGenerator : public CandidateGenerator {
 public:
  std::map<std::string, std::vector<ScoredCandidate>> canned;
  std::vector<ScoredCandidate> generate(const std::string& product) const override {
    auto it = canned.find(product);
    return it == canned.end() ? std::vector<ScoredCandidate>{} : it->second;
  }
};

ScoredCandidate make_candidate(const std::string& smiles, double score) {
  ScoredCandidate c;
  c.smiles = smiles;
  c.score = score;
  c.finished = true;
  return c;
}

bool monotone(const EvalReport& report) {
  for (std::size_t k = 1; k < report.accuracy.size(); ++k)
    if (report.accuracy[k] < report.accuracy[k - 1]) return false;
  return true;
}

bool criterion_metrics(std::string& detail) {
  FixedGenerator generator;
  generator.canned["CCO"] = {make_candidate("CC=O", 0.9)};
  generator.canned["CCC"] = {make_candidate("CCN", 0.9), make_candidate("CCO", 0.8),
                             make_candidate("CC(C)C", 0.7), make_candidate("C=CC", 0.6)};
  ReactionRecord r1, r2;
  r1.product = "CCO";
  r1.reactants = "CC=O";
  r1.id = "1";
  r2.product = "CCC";
  r2.reactants = "C=CC";
  r2.id = "2";

  const EvalReport report = evaluate(generator, {r1, r2});
  if (report.accuracy[0] != 0.5 || report.accuracy[2] != 1.0) {
    detail = "hand-built case expected 50%/100%, got " + std::to_string(report.accuracy[0]) +
             "/" + std::to_string(report.accuracy[2]);
    return false;
  }
  if (!monotone(report)) {
    detail = "accuracies not monotone";
    return false;
  }

  // A few random canned reports stay monotone too.
  Rng rng(4096);
  for (int trial = 0; trial < 50; ++trial) {
    FixedGenerator g2;
    std::vector<ReactionRecord> records;
    for (int r = 0; r < 6; ++r) {
      ReactionRecord record;
      record.product = "C" + std::string(r + 1, 'C');
      record.reactants = record.product;
      record.id = std::to_string(r);
      records.push_back(record);
      std::vector<ScoredCandidate> list;
      const int hit_rank = static_cast<int>(rng.bounded(14));
      for (int rank = 0; rank < 12; ++rank)
        list.push_back(make_candidate(rank == hit_rank ? record.reactants : "CN", 1.0 - rank * 0.05));
      g2.canned[record.product] = list;
    }
    if (!monotone(evaluate(g2, records))) {
      detail = "random report violated monotonicity";
      return false;
    }
  }
  detail = "50%/100% case plus 50 random reports";
  return true;
}

// ---- 10: end-to-end CLI smoke ----------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RETRO_BIN) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool criterion_end_to_end(std::string& detail) {
  const std::string dir = "/tmp/retro_accept_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);

  {
    std::ofstream cfg(dir + "/config.txt");
    cfg << "layers_enc = 2\nlayers_dec = 2\nheads = 4\nd_model = 64\nd_ff = 128\n"
        << "dropout = 0.0\nmax_relative_distance = 4\nbias_mode = gaussian\nsigma = 1.0\n"
        << "lambda_intra = 1.0\nlambda_cross = 1.0\nbatch_tokens = 700\n"
        << "schedule_factor = 2.0\nwarmup_steps = 150\nvalidate_every = 100\n"
        << "patience = 40\nmax_steps = 500\nseed = 1\n";
  }

  struct Step {
    const char* what;
    std::string args;
  };
  const std::vector<Step> steps = {
      {"ingest", "ingest --input " + kDataDir + "/toy_reactions.txt --out-dir " + dir +
                     "/data --split-ratio 70/15/15 --split-seed 3"},
      {"augment", "augment --input " + dir + "/data/train.txt --out " + dir +
                      "/augmented.txt --factor 3 --seed 5"},
      {"train", "train --config " + dir + "/config.txt --train " + dir +
                    "/augmented.txt --valid " + dir + "/data/valid.txt --out-dir " + dir +
                    "/run"},
      {"predict", "predict --checkpoint " + dir + "/run/checkpoint.bin --input " + dir +
                      "/data/test.txt --out " + dir + "/preds.txt --beam 5 --topk 5 "
                      "--max-len 60"},
      {"eval", "eval --checkpoint " + dir + "/run/checkpoint.bin --input " + dir +
                   "/data/test.txt --beam 10 --max-len 60 --out " + dir + "/report1.txt"},
      {"eval-again", "eval --checkpoint " + dir + "/run/checkpoint.bin --input " + dir +
                         "/data/test.txt --beam 10 --max-len 60 --out " + dir +
                         "/report2.txt"},
  };
  for (const auto& step : steps) {
    const int code = run_cli(step.args);
    if (code != 0) {
      detail = std::string(step.what) + " exited " + std::to_string(code);
      return false;
    }
  }

  const std::string report = slurp(dir + "/report1.txt");
  if (report.find("top1_accuracy = ") == std::string::npos) {
    detail = "report missing machine-readable block";
    return false;
  }
  if (report != slurp(dir + "/report2.txt")) {
    detail = "re-running eval produced a different report";
    return false;
  }
  for (const char* artifact :
       {"/data/ingest.manifest", "/augmented.txt.manifest", "/run/train.manifest",
        "/preds.txt.manifest", "/report1.txt.manifest", "/run/metrics.tsv"})
    if (!fs::exists(dir + artifact)) {
      detail = std::string("missing artifact ") + artifact;
      return false;
    }

  // Surface the headline numbers for the log.
  std::istringstream in(report);
  std::string line;
  std::string top1;
  while (std::getline(in, line))
    if (line.rfind("top1_accuracy = ", 0) == 0) top1 = line.substr(16);
  detail = "pipeline exit 0, reproducible report, top-1 " + top1;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "parser round trip on bundled corpus", criterion_parser},
      {2, "graph-prior oracles", criterion_prior_oracle},
      {3, "vanilla reduction is bitwise", criterion_vanilla_reduction},
      {4, "finite-difference gradient check", criterion_gradient_check},
      {5, "decoder causality is bitwise", criterion_causality},
      {6, "beam search equals exhaustive", criterion_beam_exhaustive},
      {7, "overfit the 32-reaction toy corpus", criterion_overfit},
      {8, "20x augmentation contract", criterion_augmentation},
      {9, "top-K metric monotonicity", criterion_metrics},
      {10, "end-to-end CLI smoke", criterion_end_to_end},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  // Per-criterion runtime ceilings from the acceptance contract.
  const std::map<int, double> budget = {{1, 10.0}, {4, 300.0}, {7, 900.0}};

  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.number)) continue;
    std::string detail;
    const auto start = Clock::now();
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    auto limit = budget.find(criterion.number);
    if (ok && limit != budget.end() && seconds > limit->second) {
      ok = false;
      detail = "over time budget of " + std::to_string(limit->second) + "s";
    }
    report(criterion.number, criterion.name, ok, seconds, detail);
  }

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return 1;
}
