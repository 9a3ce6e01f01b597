// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "retro/graph_prior.hpp"
#include "retro/tensor.hpp"
#include "retro/vocab.hpp"

namespace retro {

struct ModelConfig {
  int layers_enc = 6;
  int layers_dec = 6;
  int heads = 8;
  int d_model = 256;
  int d_ff = 2048;
  double dropout = 0.3;
  int max_relative_distance = 4;
  int vocab_size = 0;
  double lambda_intra = 1.0;
  double lambda_cross = 1.0;
  BiasMode bias_mode = BiasMode::Gaussian;
  double sigma = 1.0;
  std::array<double, 4> hard_weights = {1.0, 0.5, 0.25, 0.125};

  void validate() const;  // throws std::invalid_argument
  IntraBiasConfig intra_config() const;
};

const char* to_string(BiasMode mode);
BiasMode bias_mode_from_string(const std::string& name);

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor rel;  // key-side relative-position table; undefined for cross attention
};

struct LayerNormParams {
  Tensor gain, bias;
};

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;
};

struct EncoderLayerParams {
  AttentionParams self;
  LayerNormParams ln1, ln2;
  FeedForwardParams ff;
};

struct DecoderLayerParams {
  AttentionParams self;
  AttentionParams cross;
  LayerNormParams ln1, ln2, ln3;
  FeedForwardParams ff;
};

struct ModelParams {
  Tensor embedding;  // (vocab, d_model); also the tied output projection
  std::vector<EncoderLayerParams> enc;
  std::vector<DecoderLayerParams> dec;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named() const;
  void zero_grads() const;
  ModelParams clone() const;
};

// Per-example additive attention priors, already scaled by their lambdas.
// Absent optionals mean the corresponding code path is skipped entirely.
struct AttentionBiasBundle {
  std::optional<Eigen::MatrixXd> enc_self_bias;  // (Tx, Tx)
  std::optional<Eigen::MatrixXd> cross_bias;     // (Ty_in, Tx), row t aligns token y_{t-1}
  std::vector<std::uint8_t> src_pad;             // 1 marks a padding key; empty = none
  std::vector<std::uint8_t> tgt_pad;
};

// Assembles the bundle for one example. Pass `reactants` only for
// teacher-forced training; cross bias needs the target tokens and is
// disabled at inference.
AttentionBiasBundle build_bias_bundle(const ModelConfig& cfg, const ParsedMol& product,
                                      const ParsedMol* reactants);

// Deterministic per-call dropout seeds within one forward pass.
struct DropoutStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;
  std::uint64_t next() { return seed ^ (0x9e3779b97f4a7c15ULL * ++counter); }
};

// softmax(mask_fill(Q Kᵀ/√d_k [+rel] + bias, mask, -1e9)) · V over
// (heads, T, d_k) tensors. `bias` and `mask` are (T_q, T_k) or undefined;
// `rel` enters before the 1/√d_k scaling.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& bias,
                 const Tensor& mask, const Tensor& rel = Tensor());

class Model {
 public:
  Model(ModelConfig cfg, ModelParams params);
  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  // (Tx, d_model) contextual memory. Deterministic when stream is null.
  Tensor encode(const std::vector<int>& src_ids, const AttentionBiasBundle& priors,
                DropoutStream* stream = nullptr) const;

  // Teacher-forced logits (Ty_in, vocab) for every position.
  Tensor decode(const Tensor& memory, const std::vector<int>& tgt_in_ids,
                const AttentionBiasBundle& priors, DropoutStream* stream = nullptr) const;

  // Next-token logits after the prefix (eval mode, cross bias off).
  Eigen::VectorXd decode_step(const Tensor& memory, const std::vector<int>& prefix,
                              const AttentionBiasBundle& priors) const;

 private:
  ModelConfig cfg_;
  ModelParams params_;
};

}  // namespace retro
