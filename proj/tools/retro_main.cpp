// SPDX-License-Identifier: Apache-2.0
//
// Single retro executable: tokenize, emit-priors, ingest, augment, train,
// predict, eval. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 runtime failure.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "retro/checkpoint.hpp"
#include "retro/config.hpp"
#include "retro/decoding.hpp"
#include "retro/graph_prior.hpp"
#include "retro/reaction_io.hpp"
#include "retro/training.hpp"

namespace fs = std::filesystem;
using namespace retro;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UnreadableFile("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::string tokenize_one(const std::string& text) {
  std::string out;
  const auto seq = tokenize(text);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out += ' ';
    out += seq.tokens[i].text;
  }
  return out;
}

// ---- tokenize ---------------------------------------------------------------

int run_tokenize(const std::string& input, const std::string& output,
                 std::uint64_t seed) {
  const auto lines = read_lines(input);
  std::ostringstream body;
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const std::string text = line.substr(0, line.find('\t'));
    try {
      const auto sep = text.find(">>");
      if (sep != std::string::npos)
        body << tokenize_one(text.substr(0, sep)) << " >> "
             << tokenize_one(text.substr(sep + 2)) << "\n";
      else
        body << tokenize_one(text) << "\n";
    } catch (const SmilesError& e) {
      failures.push_back("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  for (const auto& failure : failures) std::cerr << failure << "\n";
  if (output.empty()) {
    std::cout << body.str();
  } else {
    open_out(output) << body.str();
    ManifestWriter manifest("tokenize");
    manifest.add("input", input);
    manifest.add("output", output);
    manifest.add("seed", std::to_string(seed));
    manifest.write(output + ".manifest");
  }
  if (!failures.empty())
    throw DataError(std::to_string(failures.size()) + " line(s) failed to tokenize");
  return kExitOk;
}

// ---- emit-priors ------------------------------------------------------------

void dump_matrix_int(std::ostream& out, const Eigen::MatrixXi& m, const std::string& name) {
  out << m.rows() << " " << m.cols() << " " << name << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << "\n";
  }
}

void dump_matrix(std::ostream& out, const Eigen::MatrixXd& m, const std::string& name) {
  out << m.rows() << " " << m.cols() << " " << name << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << "\n";
  }
}

int run_emit_priors(const std::string& input, const std::string& output, int line,
                    const std::string& config_path, const std::string& bias_mode,
                    double sigma, std::uint64_t seed) {
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  if (!config_path.empty()) apply_config(read_kv_file(config_path), model_cfg, train_cfg);
  if (!bias_mode.empty()) model_cfg.bias_mode = bias_mode_from_string(bias_mode);
  if (sigma > 0) model_cfg.sigma = sigma;

  const auto ingest = read_reaction_file(input);
  const ReactionRecord* record = nullptr;
  if (line <= 0) {
    record = &ingest.records.front();
  } else {
    for (const auto& r : ingest.records)
      if (r.id == std::to_string(line)) record = &r;
    if (!record) throw DataError("no valid reaction at input line " + std::to_string(line));
  }

  const ParsedMol product = parse(record->product);
  const ParsedMol reactants = parse(record->reactants);
  const DistanceMatrix dist = all_pairs_distance(product.graph);
  const HopMasks masks = hop_masks(dist);
  IntraBiasConfig bias_cfg = model_cfg.intra_config();
  if (bias_cfg.mode == BiasMode::Off) bias_cfg.mode = BiasMode::Gaussian;
  const IntraBias bias = intra_bias(product.tokens, dist, bias_cfg);
  const CrossAlignment alignment =
      cross_alignment(product, reactants, model_cfg.lambda_cross);

  std::ostringstream body;
  dump_matrix_int(body, dist.d, "D");
  for (int h = 0; h < 4; ++h)
    dump_matrix_int(body, masks.m[h], "m" + std::to_string(h + 1));
  dump_matrix(body, bias.b, "B_intra");
  dump_matrix(body, alignment.b, "B_cross");

  if (output.empty()) {
    std::cout << body.str();
  } else {
    open_out(output) << body.str();
    ManifestWriter manifest("emit-priors");
    manifest.add("input", input);
    manifest.add("line", record->id);
    manifest.add("output", output);
    manifest.add("bias_mode", to_string(bias_cfg.mode));
    manifest.add("sigma", std::to_string(bias_cfg.sigma));
    manifest.add("seed", std::to_string(seed));
    manifest.write(output + ".manifest");
  }
  return kExitOk;
}

// ---- ingest -----------------------------------------------------------------

int run_ingest(const std::string& input, const std::string& out_dir,
               const std::string& split_file, const std::string& split_ratio,
               std::uint64_t split_seed) {
  auto result = read_reaction_file(input);
  if (!split_file.empty()) {
    apply_split_file(result.records, split_file);
  } else {
    int train_pct = 80, valid_pct = 10, test_pct = 10;
    if (!split_ratio.empty()) {
      if (std::sscanf(split_ratio.c_str(), "%d/%d/%d", &train_pct, &valid_pct, &test_pct) != 3)
        throw ConfigError("--split-ratio must look like 80/10/10");
    }
    apply_ratio_split(result.records, train_pct, valid_pct, test_pct, split_seed);
  }

  fs::create_directories(out_dir);
  std::vector<ReactionRecord> train_set, valid_set, test_set;
  for (const auto& record : result.records) {
    switch (record.split) {
      case Split::Valid: valid_set.push_back(record); break;
      case Split::Test: test_set.push_back(record); break;
      default: train_set.push_back(record); break;
    }
  }
  write_reaction_file(out_dir + "/train.txt", train_set);
  write_reaction_file(out_dir + "/valid.txt", valid_set);
  write_reaction_file(out_dir + "/test.txt", test_set);
  write_rejects_file(out_dir + "/rejects.txt", result.rejects);

  ManifestWriter manifest("ingest");
  manifest.add("input", input);
  manifest.add("out_dir", out_dir);
  manifest.add("split_file", split_file.empty() ? "-" : split_file);
  manifest.add("split_seed", std::to_string(split_seed));
  manifest.add("records", std::to_string(result.records.size()));
  manifest.add("rejects", std::to_string(result.rejects.size()));
  manifest.add("train", std::to_string(train_set.size()));
  manifest.add("valid", std::to_string(valid_set.size()));
  manifest.add("test", std::to_string(test_set.size()));
  manifest.write(out_dir + "/ingest.manifest");

  std::cout << "ingested " << result.records.size() << " records (" << train_set.size()
            << " train / " << valid_set.size() << " valid / " << test_set.size()
            << " test), " << result.rejects.size() << " rejected\n";
  return kExitOk;
}

// ---- augment ----------------------------------------------------------------

int run_augment(const std::string& input, const std::string& output, int factor,
                std::uint64_t seed) {
  auto ingest = read_reaction_file(input);
  for (auto& record : ingest.records) record.split = Split::Train;
  const auto pairs = augment_dataset(ingest.records, factor, seed);

  auto out = open_out(output);
  for (const auto& pair : pairs)
    out << pair.reactants_variant << ">>" << pair.product_variant << "\t"
        << pair.variant_index << "\t" << pair.origin_id << "\n";
  out.close();

  ManifestWriter manifest("augment");
  manifest.add("input", input);
  manifest.add("output", output);
  manifest.add("factor", std::to_string(factor));
  manifest.add("seed", std::to_string(seed));
  manifest.add("records", std::to_string(ingest.records.size()));
  manifest.add("pairs", std::to_string(pairs.size()));
  manifest.write(output + ".manifest");

  std::cout << "augmented " << ingest.records.size() << " records x" << factor << " -> "
            << pairs.size() << " pairs\n";
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

int run_train(const std::string& config_path, const std::string& train_path,
              const std::string& valid_path, const std::string& out_dir,
              std::int64_t seed_override) {
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  if (!config_path.empty()) apply_config(read_kv_file(config_path), model_cfg, train_cfg);
  if (seed_override >= 0) train_cfg.seed = static_cast<std::uint64_t>(seed_override);

  auto train_in = read_reaction_file(train_path);
  std::vector<ReactionRecord> valid_records;
  if (!valid_path.empty()) valid_records = read_reaction_file(valid_path).records;

  auto dataset = prepare_dataset(train_in.records, valid_records, model_cfg);
  fs::create_directories(out_dir);
  auto metrics = open_out(out_dir + "/metrics.tsv");

  const auto result = train(train_cfg, model_cfg, dataset, out_dir, &metrics, &std::cout);

  ManifestWriter manifest("train");
  manifest.add("config", config_path.empty() ? "-" : config_path);
  manifest.add("train_file", train_path);
  manifest.add("valid_file", valid_path.empty() ? "-" : valid_path);
  manifest.add("out_dir", out_dir);
  manifest.add("checkpoint", result.checkpoint_path);
  manifest.add("metrics", out_dir + "/metrics.tsv");
  manifest.add("steps", std::to_string(result.steps));
  manifest.add("best_valid_loss", std::to_string(result.best_valid_loss));
  manifest.add("vocab_size", std::to_string(dataset.vocab.size()));
  manifest.add_all(resolved_config(model_cfg, train_cfg), "config.");
  manifest.write(out_dir + "/train.manifest");

  std::cout << "trained " << result.steps << " steps; best valid loss "
            << result.best_valid_loss << "; checkpoint " << result.checkpoint_path << "\n";
  return kExitOk;
}

// ---- predict ----------------------------------------------------------------

std::string product_of_line(const std::string& line) {
  const std::string text = line.substr(0, line.find('\t'));
  const auto sep = text.find(">>");
  return sep == std::string::npos ? text : text.substr(sep + 2);
}

int run_predict(const std::string& checkpoint_path, const std::string& input,
                const std::string& output, int beam, int topk, int max_len, double alpha,
                std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Model model(ckpt.config, std::move(ckpt.params));
  BeamParams params;
  params.width = std::max(beam, topk);
  params.max_len = max_len;
  params.length_norm_alpha = alpha;
  ModelPredictor predictor(model, ckpt.vocab, params);

  const auto lines = read_lines(input);
  std::ostringstream body;
  body.precision(12);
  int emitted = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const std::string product = product_of_line(lines[i]);
    body << "# input " << (i + 1) << " " << product << "\n";
    try {
      const auto candidates = predictor.generate(product);
      const int n = std::min<int>(topk, static_cast<int>(candidates.size()));
      for (int rank = 0; rank < n; ++rank)
        body << (rank + 1) << "\t" << candidates[rank].score << "\t"
             << candidates[rank].smiles << "\n";
      ++emitted;
    } catch (const SmilesError& e) {
      body << "# error " << e.what() << "\n";
    }
  }
  if (emitted == 0) throw DataError("no usable input lines in " + input);

  if (output.empty()) {
    std::cout << body.str();
  } else {
    open_out(output) << body.str();
    ManifestWriter manifest("predict");
    manifest.add("checkpoint", checkpoint_path);
    manifest.add("input", input);
    manifest.add("output", output);
    manifest.add("beam", std::to_string(params.width));
    manifest.add("topk", std::to_string(topk));
    manifest.add("max_len", std::to_string(max_len));
    manifest.add("alpha", std::to_string(alpha));
    manifest.add("seed", std::to_string(seed));
    manifest.write(output + ".manifest");
  }
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

int run_eval(const std::string& checkpoint_path, const std::string& input,
             const std::string& output, int beam, int max_len, double alpha,
             std::uint64_t seed) {
  const auto records = read_reaction_file(input).records;
  if (records.empty()) throw EmptyTestSet("no test records in " + input);

  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Model model(ckpt.config, std::move(ckpt.params));
  BeamParams params;
  params.width = beam;
  params.max_len = max_len;
  params.length_norm_alpha = alpha;
  ModelPredictor predictor(model, ckpt.vocab, params);
  const EvalReport report = evaluate(predictor, records);
  const std::string text = render_report(report);

  std::cout << text;
  if (!output.empty()) {
    open_out(output) << text;
    ManifestWriter manifest("eval");
    manifest.add("checkpoint", checkpoint_path);
    manifest.add("input", input);
    manifest.add("output", output);
    manifest.add("beam", std::to_string(beam));
    manifest.add("max_len", std::to_string(max_len));
    manifest.add("alpha", std::to_string(alpha));
    manifest.add("seed", std::to_string(seed));
    manifest.add("records", std::to_string(report.records));
    manifest.write(output + ".manifest");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Template-free retrosynthesis transformer with molecular-graph priors"};
  app.require_subcommand(1);

  auto* tok = app.add_subcommand("tokenize", "Tokenize SMILES or reaction lines");
  std::string tok_in, tok_out;
  std::uint64_t tok_seed = 1;
  tok->add_option("--input", tok_in, "input file")->required();
  tok->add_option("--out", tok_out, "output file (default stdout)");
  tok->add_option("--seed", tok_seed, "recorded in the manifest; command is deterministic");

  auto* priors = app.add_subcommand("emit-priors", "Dump D, hop masks, B_intra, B_cross");
  std::string pri_in, pri_out, pri_cfg, pri_mode;
  int pri_line = 0;
  double pri_sigma = 0.0;
  std::uint64_t pri_seed = 1;
  priors->add_option("--input", pri_in, "reaction file")->required();
  priors->add_option("--line", pri_line, "input line number (default: first valid)");
  priors->add_option("--out", pri_out, "output file (default stdout)");
  priors->add_option("--config", pri_cfg, "key = value config file");
  priors->add_option("--bias-mode", pri_mode, "gaussian|hard|off override");
  priors->add_option("--sigma", pri_sigma, "gaussian width override");
  priors->add_option("--seed", pri_seed, "recorded in the manifest; command is deterministic");

  auto* ingest = app.add_subcommand("ingest", "Validate a reaction file and assign splits");
  std::string ing_in, ing_dir, ing_split, ing_ratio;
  std::uint64_t ing_seed = 1;
  ingest->add_option("--input", ing_in, "reaction file")->required();
  ingest->add_option("--out-dir", ing_dir, "output directory")->required();
  ingest->add_option("--split", ing_split, "companion split file (id<TAB>split)");
  ingest->add_option("--split-ratio", ing_ratio, "train/valid/test percentages, e.g. 80/10/10");
  ingest->add_option("--split-seed", ing_seed, "seed for the ratio split");

  auto* aug = app.add_subcommand("augment", "Paired representation augmentation");
  std::string aug_in, aug_out;
  int aug_factor = 20;
  std::uint64_t aug_seed = 1;
  aug->add_option("--input", aug_in, "training reaction file")->required();
  aug->add_option("--out", aug_out, "output file")->required();
  aug->add_option("--factor", aug_factor, "pairs per record (default 20)");
  aug->add_option("--seed", aug_seed, "augmentation seed");

  auto* tr = app.add_subcommand("train", "Teacher-forced training with Adam");
  std::string tr_cfg, tr_train, tr_valid, tr_dir;
  std::int64_t tr_seed = -1;
  tr->add_option("--config", tr_cfg, "key = value config file");
  tr->add_option("--train", tr_train, "training reaction file")->required();
  tr->add_option("--valid", tr_valid, "validation reaction file");
  tr->add_option("--out-dir", tr_dir, "output directory")->required();
  tr->add_option("--seed", tr_seed, "seed override");

  auto* pred = app.add_subcommand("predict", "Beam-search reactant candidates");
  std::string pred_ckpt, pred_in, pred_out;
  int pred_beam = 10, pred_topk = 10, pred_maxlen = 120;
  double pred_alpha = 0.6;
  std::uint64_t pred_seed = 1;
  pred->add_option("--checkpoint", pred_ckpt, "model checkpoint")->required();
  pred->add_option("--input", pred_in, "product SMILES or reaction lines")->required();
  pred->add_option("--out", pred_out, "output file (default stdout)");
  pred->add_option("--beam", pred_beam, "beam width");
  pred->add_option("--topk", pred_topk, "candidates to emit per input");
  pred->add_option("--max-len", pred_maxlen, "max generated tokens");
  pred->add_option("--alpha", pred_alpha, "length normalization exponent");
  pred->add_option("--seed", pred_seed, "recorded in the manifest; command is deterministic");

  auto* ev = app.add_subcommand("eval", "Top-K accuracy on a test reaction file");
  std::string ev_ckpt, ev_in, ev_out;
  int ev_beam = 10, ev_maxlen = 120;
  double ev_alpha = 0.6;
  std::uint64_t ev_seed = 1;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--input", ev_in, "test reaction file")->required();
  ev->add_option("--out", ev_out, "report file (default stdout only)");
  ev->add_option("--beam", ev_beam, "beam width (>= 10 for top-10)");
  ev->add_option("--max-len", ev_maxlen, "max generated tokens");
  ev->add_option("--alpha", ev_alpha, "length normalization exponent");
  ev->add_option("--seed", ev_seed, "recorded in the manifest; command is deterministic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help goes to stdout, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (tok->parsed()) return run_tokenize(tok_in, tok_out, tok_seed);
    if (priors->parsed())
      return run_emit_priors(pri_in, pri_out, pri_line, pri_cfg, pri_mode, pri_sigma,
                             pri_seed);
    if (ingest->parsed()) return run_ingest(ing_in, ing_dir, ing_split, ing_ratio, ing_seed);
    if (aug->parsed()) return run_augment(aug_in, aug_out, aug_factor, aug_seed);
    if (tr->parsed()) return run_train(tr_cfg, tr_train, tr_valid, tr_dir, tr_seed);
    if (pred->parsed())
      return run_predict(pred_ckpt, pred_in, pred_out, pred_beam, pred_topk, pred_maxlen,
                         pred_alpha, pred_seed);
    if (ev->parsed())
      return run_eval(ev_ckpt, ev_in, ev_out, ev_beam, ev_maxlen, ev_alpha, ev_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnreadableFile& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const EmptyAfterRejects& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const EmptyTestSet& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const EmptyDataset& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseFailure& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SplitViolation& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SmilesError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DuplicateMapNumber& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
