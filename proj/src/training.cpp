// SPDX-License-Identifier: Apache-2.0
#include "retro/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "retro/rng.hpp"

namespace retro {

double noam_lr(double schedule_factor, int d_model, int warmup_steps, int step) {
  const double s = static_cast<double>(step);
  const double warmup = static_cast<double>(warmup_steps);
  return schedule_factor * std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(warmup, -1.5));
}

Adam::Adam(const ModelParams& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, tensor] : params.named()) {
    params_.push_back(tensor);
    m_.push_back(Eigen::ArrayXd::Zero(tensor.size()));
    v_.push_back(Eigen::ArrayXd::Zero(tensor.size()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const Eigen::ArrayXd& g = p.grad();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.square();
    p.data() -= lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
  }
}

bool EarlyStopping::update(double valid_loss, double valid_acc) {
  ++count_;
  loss_improved_last_ = valid_loss < best_loss_;
  const bool acc_improved = valid_acc > best_acc_;
  if (loss_improved_last_) best_loss_ = valid_loss;
  if (acc_improved) best_acc_ = valid_acc;
  if (loss_improved_last_ || acc_improved) {
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

namespace {

TrainExample make_example(const ReactionRecord& record, const Vocab& vocab,
                          const ModelConfig& cfg, bool with_cross) {
  const ParsedMol product = parse(record.product);
  const ParsedMol reactants = parse(record.reactants);

  TrainExample example;
  example.src = vocab.encode(product.tokens);
  const std::vector<int> tgt = vocab.encode(reactants.tokens);
  example.targets = tgt;
  example.targets.push_back(Vocab::kEos);
  example.tgt_in.push_back(Vocab::kBos);
  example.tgt_in.insert(example.tgt_in.end(), tgt.begin(), tgt.end());
  example.priors = build_bias_bundle(cfg, product, with_cross ? &reactants : nullptr);
  return example;
}

}  // namespace

TrainDataset prepare_dataset(const std::vector<ReactionRecord>& train_records,
                             const std::vector<ReactionRecord>& valid_records,
                             const ModelConfig& cfg) {
  if (train_records.empty()) throw EmptyDataset("prepare_dataset: no training records");

  std::vector<std::string> tokens;
  for (const auto& record : train_records) {
    for (const auto& t : tokenize(record.product).tokens) tokens.push_back(t.text);
    for (const auto& t : tokenize(record.reactants).tokens) tokens.push_back(t.text);
  }

  TrainDataset dataset;
  dataset.vocab = Vocab::build(tokens);
  ModelConfig sized = cfg;
  sized.vocab_size = dataset.vocab.size();
  for (const auto& record : train_records)
    dataset.train.push_back(make_example(record, dataset.vocab, sized, true));
  for (const auto& record : valid_records)
    dataset.valid.push_back(make_example(record, dataset.vocab, sized, true));
  return dataset;
}

Tensor batch_loss(const Model& model, const std::vector<const TrainExample*>& batch,
                  double label_smoothing, DropoutStream* stream) {
  Tensor total;
  long long tokens = 0;
  for (const TrainExample* example : batch) {
    Tensor memory = model.encode(example->src, example->priors, stream);
    Tensor logits = model.decode(memory, example->tgt_in, example->priors, stream);
    Tensor ce = cross_entropy(logits, example->targets, Vocab::kPad, label_smoothing,
                              Reduction::Sum);
    total = total.defined() ? add(total, ce) : ce;
    tokens += static_cast<long long>(example->targets.size());
  }
  return scale(total, 1.0 / static_cast<double>(std::max<long long>(tokens, 1)));
}

bool greedy_exact_match(const Model& model, const TrainExample& example) {
  Tensor memory = model.encode(example.src, example.priors);
  std::vector<int> prefix = {Vocab::kBos};
  const std::size_t budget = example.targets.size() + 8;
  std::vector<int> generated;
  for (std::size_t t = 0; t < budget; ++t) {
    const Eigen::VectorXd logits = model.decode_step(memory, prefix, example.priors);
    int best = 0;
    logits.maxCoeff(&best);
    if (best == Vocab::kEos) break;
    generated.push_back(best);
    prefix.push_back(best);
  }
  std::vector<int> want(example.targets.begin(), example.targets.end() - 1);  // strip EOS
  return generated == want;
}

ValidationResult validate(const Model& model, const std::vector<TrainExample>& examples,
                          double label_smoothing) {
  ValidationResult result;
  if (examples.empty()) return result;
  double loss_sum = 0.0;
  long long token_sum = 0;
  int hits = 0;
  for (const auto& example : examples) {
    Tensor memory = model.encode(example.src, example.priors);
    Tensor logits = model.decode(memory, example.tgt_in, example.priors);
    loss_sum +=
        cross_entropy(logits, example.targets, Vocab::kPad, label_smoothing, Reduction::Sum)
            .item();
    token_sum += static_cast<long long>(example.targets.size());
    if (greedy_exact_match(model, example)) ++hits;
  }
  result.loss = loss_sum / static_cast<double>(std::max<long long>(token_sum, 1));
  result.exact_match = static_cast<double>(hits) / static_cast<double>(examples.size());
  return result;
}

namespace {

// Length-bucketed, seeded batch assembly: shuffle, stable-sort by a coarse
// length bucket, slice by token budget, then shuffle batch order.
std::vector<std::vector<const TrainExample*>> make_batches(
    const std::vector<TrainExample>& examples, long long batch_tokens, Rng& rng) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  auto cost = [&](std::size_t i) {
    return static_cast<long long>(examples[i].src.size() + examples[i].tgt_in.size());
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cost(a) / 8 < cost(b) / 8; });

  std::vector<std::vector<const TrainExample*>> batches;
  std::vector<const TrainExample*> current;
  long long used = 0;
  for (std::size_t i : order) {
    if (!current.empty() && used + cost(i) > batch_tokens) {
      batches.push_back(std::move(current));
      current.clear();
      used = 0;
    }
    current.push_back(&examples[i]);
    used += cost(i);
  }
  if (!current.empty()) batches.push_back(std::move(current));
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

}  // namespace

TrainResult train(const TrainConfig& train_cfg, ModelConfig model_cfg,
                  const TrainDataset& dataset, const std::string& out_dir,
                  std::ostream* metrics, std::ostream* info) {
  train_cfg.validate();
  if (dataset.train.empty()) throw EmptyDataset("train: empty training set");
  model_cfg.vocab_size = dataset.vocab.size();
  model_cfg.validate();

  Model model = Model::init(model_cfg, train_cfg.seed);
  Adam adam(model.params(), train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps);
  EarlyStopping stopper(train_cfg.patience);

  TrainResult result;
  result.checkpoint_path = out_dir + "/checkpoint.bin";

  double running_loss = 0.0;
  int running_count = 0;
  int step = 0;
  bool stop = false;
  bool saved_once = false;

  for (std::uint64_t epoch = 0; !stop && step < train_cfg.max_steps; ++epoch) {
    Rng epoch_rng(splitmix64(train_cfg.seed ^ (0x5851f42d4c957f2dULL + epoch)));
    auto batches = make_batches(dataset.train, train_cfg.batch_tokens, epoch_rng);
    for (const auto& batch : batches) {
      ++step;
      DropoutStream stream{splitmix64(train_cfg.seed ^ (0x2545f4914f6cdd1dULL *
                                                        static_cast<std::uint64_t>(step))),
                           0};
      double loss_value = 0.0;
      {
        Tape tape;
        Tensor loss = batch_loss(model, batch, train_cfg.label_smoothing,
                                 model_cfg.dropout > 0.0 ? &stream : nullptr);
        loss_value = loss.item();
        if (!std::isfinite(loss_value))
          throw NonFiniteLoss("train: non-finite loss at step " + std::to_string(step) +
                              " (lr=" +
                              std::to_string(noam_lr(train_cfg.schedule_factor,
                                                     model_cfg.d_model,
                                                     train_cfg.warmup_steps, step)) +
                              ", batch=" + std::to_string(batch.size()) + " examples)");
        backward(loss);
      }
      adam.step(noam_lr(train_cfg.schedule_factor, model_cfg.d_model, train_cfg.warmup_steps,
                        step));
      model.params().zero_grads();
      running_loss += loss_value;
      ++running_count;

      if (step % train_cfg.validate_every == 0) {
        const auto& valid_set = dataset.valid.empty() ? dataset.train : dataset.valid;
        ValidationResult valid = validate(model, valid_set, train_cfg.label_smoothing);
        const double train_loss = running_loss / std::max(running_count, 1);
        running_loss = 0.0;
        running_count = 0;
        if (metrics)
          (*metrics) << step << "\t" << train_loss << "\t" << valid.loss << "\t"
                     << valid.exact_match << "\n"
                     << std::flush;
        if (info)
          (*info) << "step " << step << "  train " << train_loss << "  valid " << valid.loss
                  << "  acc " << valid.exact_match << "\n";
        result.last_valid_acc = valid.exact_match;
        ++result.validations;
        const bool should_stop = stopper.update(valid.loss, valid.exact_match);
        if (stopper.loss_improved_last()) {
          result.best_valid_loss = valid.loss;
          save_checkpoint(result.checkpoint_path, model_cfg, dataset.vocab, model.params());
          saved_once = true;
        }
        if (should_stop) {
          stop = true;
          break;
        }
      }
      if (step >= train_cfg.max_steps) break;
    }
  }

  if (!saved_once)
    save_checkpoint(result.checkpoint_path, model_cfg, dataset.vocab, model.params());
  result.steps = step;
  return result;
}

}  // namespace retro
