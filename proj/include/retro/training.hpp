// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "retro/augment.hpp"
#include "retro/checkpoint.hpp"
#include "retro/config.hpp"
#include "retro/model.hpp"

namespace retro {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyDataset : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// lr(step) = factor * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
double noam_lr(double schedule_factor, int d_model, int warmup_steps, int step);

// Standard bias-corrected Adam over the model's named parameters.
class Adam {
 public:
  Adam(const ModelParams& params, double beta1, double beta2, double eps);
  void step(double lr);

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::ArrayXd> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

// Stop after `patience` consecutive validations where neither the loss nor
// the accuracy improves.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when training should stop.
  bool update(double valid_loss, double valid_acc);
  bool loss_improved_last() const { return loss_improved_last_; }
  int validations() const { return count_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int count_ = 0;
  int stale_ = 0;
  bool loss_improved_last_ = false;
  double best_loss_ = std::numeric_limits<double>::infinity();
  double best_acc_ = -1.0;
};

// One teacher-forced example, fully preprocessed.
struct TrainExample {
  std::vector<int> src;      // product tokens
  std::vector<int> tgt_in;   // BOS + targets[:-1]
  std::vector<int> targets;  // reactant tokens + EOS
  AttentionBiasBundle priors;
};

struct TrainDataset {
  Vocab vocab;
  std::vector<TrainExample> train;
  std::vector<TrainExample> valid;
};

// Builds the vocabulary from the training side, encodes both splits and
// precomputes attention priors (cross bias on training examples only if
// `cross_bias_on_valid` is false; validation loss mirrors training priors
// by default).
TrainDataset prepare_dataset(const std::vector<ReactionRecord>& train_records,
                             const std::vector<ReactionRecord>& valid_records,
                             const ModelConfig& cfg);

// Mean over non-pad target tokens across the whole batch.
Tensor batch_loss(const Model& model, const std::vector<const TrainExample*>& batch,
                  double label_smoothing, DropoutStream* stream);

// Greedy decode; true when the generated tokens equal the target exactly.
bool greedy_exact_match(const Model& model, const TrainExample& example);

struct ValidationResult {
  double loss = 0.0;
  double exact_match = 0.0;
};

ValidationResult validate(const Model& model, const std::vector<TrainExample>& examples,
                          double label_smoothing);

struct TrainResult {
  std::string checkpoint_path;
  int steps = 0;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  double last_valid_acc = 0.0;
  int validations = 0;
};

// Runs the full loop: token-bucketed seeded batching, Noam schedule, Adam,
// periodic validation, early stopping, best-checkpoint saving, and a
// `step<TAB>train_loss<TAB>valid_loss<TAB>valid_acc` metrics line per
// validation (written to `metrics` when given).
TrainResult train(const TrainConfig& train_cfg, ModelConfig model_cfg,
                  const TrainDataset& dataset, const std::string& out_dir,
                  std::ostream* metrics = nullptr, std::ostream* info = nullptr);

}  // namespace retro
