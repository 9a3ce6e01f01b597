// SPDX-License-Identifier: Apache-2.0
#include "retro/model.hpp"

#include <cmath>
#include <stdexcept>

#include "retro/rng.hpp"

namespace retro {

void ModelConfig::validate() const {
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0)
    throw std::invalid_argument("ModelConfig: d_model must be a positive multiple of heads");
  if (layers_enc < 1 || layers_dec < 1)
    throw std::invalid_argument("ModelConfig: layer counts must be >= 1");
  if (max_relative_distance < 1)
    throw std::invalid_argument("ModelConfig: max_relative_distance must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
  if (vocab_size < 5) throw std::invalid_argument("ModelConfig: vocab_size not set");
  if (d_ff <= 0) throw std::invalid_argument("ModelConfig: d_ff must be positive");
  if (sigma <= 0.0) throw std::invalid_argument("ModelConfig: sigma must be positive");
}

IntraBiasConfig ModelConfig::intra_config() const {
  IntraBiasConfig cfg;
  cfg.mode = bias_mode;
  cfg.weights = hard_weights;
  cfg.sigma = sigma;
  cfg.lambda = lambda_intra;
  return cfg;
}

const char* to_string(BiasMode mode) {
  switch (mode) {
    case BiasMode::HardWeighted: return "hard";
    case BiasMode::Gaussian: return "gaussian";
    case BiasMode::Off: return "off";
  }
  return "gaussian";
}

BiasMode bias_mode_from_string(const std::string& name) {
  if (name == "hard") return BiasMode::HardWeighted;
  if (name == "gaussian") return BiasMode::Gaussian;
  if (name == "off") return BiasMode::Off;
  throw std::invalid_argument("unknown bias_mode '" + name + "' (hard|gaussian|off)");
}

namespace {

Tensor xavier(Shape shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape[shape.size() - 2]);
  const double fan_out = static_cast<double>(shape[shape.size() - 1]);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(shape, true);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

AttentionParams init_attention(int d_model, int heads, int clip, bool with_rel, Rng& rng) {
  AttentionParams p;
  p.wq = xavier({d_model, d_model}, rng);
  p.bq = Tensor::zeros({d_model}, true);
  p.wk = xavier({d_model, d_model}, rng);
  p.bk = Tensor::zeros({d_model}, true);
  p.wv = xavier({d_model, d_model}, rng);
  p.bv = Tensor::zeros({d_model}, true);
  p.wo = xavier({d_model, d_model}, rng);
  p.bo = Tensor::zeros({d_model}, true);
  if (with_rel) p.rel = xavier({2 * clip + 1, d_model / heads}, rng);
  return p;
}

LayerNormParams init_layer_norm(int d_model) {
  LayerNormParams p;
  p.gain = Tensor::full({d_model}, 1.0, true);
  p.bias = Tensor::zeros({d_model}, true);
  return p;
}

FeedForwardParams init_ff(int d_model, int d_ff, Rng& rng) {
  FeedForwardParams p;
  p.w1 = xavier({d_model, d_ff}, rng);
  p.b1 = Tensor::zeros({d_ff}, true);
  p.w2 = xavier({d_ff, d_model}, rng);
  p.b2 = Tensor::zeros({d_model}, true);
  return p;
}

void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const AttentionParams& p) {
  out.push_back({prefix + ".wq", p.wq});
  out.push_back({prefix + ".bq", p.bq});
  out.push_back({prefix + ".wk", p.wk});
  out.push_back({prefix + ".bk", p.bk});
  out.push_back({prefix + ".wv", p.wv});
  out.push_back({prefix + ".bv", p.bv});
  out.push_back({prefix + ".wo", p.wo});
  out.push_back({prefix + ".bo", p.bo});
  if (p.rel.defined()) out.push_back({prefix + ".rel", p.rel});
}

void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const LayerNormParams& p) {
  out.push_back({prefix + ".gain", p.gain});
  out.push_back({prefix + ".bias", p.bias});
}

void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const FeedForwardParams& p) {
  out.push_back({prefix + ".w1", p.w1});
  out.push_back({prefix + ".b1", p.b1});
  out.push_back({prefix + ".w2", p.w2});
  out.push_back({prefix + ".b2", p.b2});
}

Tensor clone_tensor(const Tensor& t) {
  if (!t.defined()) return Tensor();
  Tensor copy = Tensor::zeros(t.shape(), t.requires_grad());
  copy.data() = t.data();
  return copy;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams params;
  params.embedding = xavier({cfg.vocab_size, cfg.d_model}, rng);
  const int clip = cfg.max_relative_distance;
  for (int l = 0; l < cfg.layers_enc; ++l) {
    EncoderLayerParams layer;
    layer.self = init_attention(cfg.d_model, cfg.heads, clip, true, rng);
    layer.ln1 = init_layer_norm(cfg.d_model);
    layer.ln2 = init_layer_norm(cfg.d_model);
    layer.ff = init_ff(cfg.d_model, cfg.d_ff, rng);
    params.enc.push_back(std::move(layer));
  }
  for (int l = 0; l < cfg.layers_dec; ++l) {
    DecoderLayerParams layer;
    layer.self = init_attention(cfg.d_model, cfg.heads, clip, true, rng);
    layer.cross = init_attention(cfg.d_model, cfg.heads, clip, false, rng);
    layer.ln1 = init_layer_norm(cfg.d_model);
    layer.ln2 = init_layer_norm(cfg.d_model);
    layer.ln3 = init_layer_norm(cfg.d_model);
    layer.ff = init_ff(cfg.d_model, cfg.d_ff, rng);
    params.dec.push_back(std::move(layer));
  }
  return params;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.push_back({"embedding", embedding});
  for (std::size_t l = 0; l < enc.size(); ++l) {
    const std::string p = "enc." + std::to_string(l);
    collect(out, p + ".self", enc[l].self);
    collect(out, p + ".ln1", enc[l].ln1);
    collect(out, p + ".ln2", enc[l].ln2);
    collect(out, p + ".ff", enc[l].ff);
  }
  for (std::size_t l = 0; l < dec.size(); ++l) {
    const std::string p = "dec." + std::to_string(l);
    collect(out, p + ".self", dec[l].self);
    collect(out, p + ".cross", dec[l].cross);
    collect(out, p + ".ln1", dec[l].ln1);
    collect(out, p + ".ln2", dec[l].ln2);
    collect(out, p + ".ln3", dec[l].ln3);
    collect(out, p + ".ff", dec[l].ff);
  }
  return out;
}

void ModelParams::zero_grads() const {
  for (auto&& [name, tensor] : named()) tensor.zero_grad();
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  copy.embedding = clone_tensor(embedding);
  auto clone_attention = [](const AttentionParams& p) {
    AttentionParams q;
    q.wq = clone_tensor(p.wq); q.bq = clone_tensor(p.bq);
    q.wk = clone_tensor(p.wk); q.bk = clone_tensor(p.bk);
    q.wv = clone_tensor(p.wv); q.bv = clone_tensor(p.bv);
    q.wo = clone_tensor(p.wo); q.bo = clone_tensor(p.bo);
    q.rel = clone_tensor(p.rel);
    return q;
  };
  for (const auto& layer : enc) {
    EncoderLayerParams out;
    out.self = clone_attention(layer.self);
    out.ln1 = {clone_tensor(layer.ln1.gain), clone_tensor(layer.ln1.bias)};
    out.ln2 = {clone_tensor(layer.ln2.gain), clone_tensor(layer.ln2.bias)};
    out.ff = {clone_tensor(layer.ff.w1), clone_tensor(layer.ff.b1), clone_tensor(layer.ff.w2),
              clone_tensor(layer.ff.b2)};
    copy.enc.push_back(std::move(out));
  }
  for (const auto& layer : dec) {
    DecoderLayerParams out;
    out.self = clone_attention(layer.self);
    out.cross = clone_attention(layer.cross);
    out.ln1 = {clone_tensor(layer.ln1.gain), clone_tensor(layer.ln1.bias)};
    out.ln2 = {clone_tensor(layer.ln2.gain), clone_tensor(layer.ln2.bias)};
    out.ln3 = {clone_tensor(layer.ln3.gain), clone_tensor(layer.ln3.bias)};
    out.ff = {clone_tensor(layer.ff.w1), clone_tensor(layer.ff.b1), clone_tensor(layer.ff.w2),
              clone_tensor(layer.ff.b2)};
    copy.dec.push_back(std::move(out));
  }
  return copy;
}

AttentionBiasBundle build_bias_bundle(const ModelConfig& cfg, const ParsedMol& product,
                                      const ParsedMol* reactants) {
  AttentionBiasBundle bundle;
  if (cfg.bias_mode != BiasMode::Off && cfg.lambda_intra != 0.0) {
    const DistanceMatrix dist = all_pairs_distance(product.graph);
    const IntraBias bias = intra_bias(product.tokens, dist, cfg.intra_config());
    bundle.enc_self_bias = cfg.lambda_intra * bias.b;
  }
  if (reactants != nullptr && cfg.lambda_cross != 0.0) {
    const CrossAlignment alignment = cross_alignment(product, *reactants, cfg.lambda_cross);
    const Index t_x = alignment.b.rows();
    const Index t_y = alignment.b.cols();
    // Decoder inputs are [BOS, y_1, ..., y_{Ty-1}]; query row t sees the
    // alignment column of the token it already holds, keeping info flow causal.
    Eigen::MatrixXd dec(t_y + 1, t_x);
    dec.setZero();
    for (Index t = 1; t <= t_y; ++t)
      dec.row(t) = cfg.lambda_cross * alignment.b.col(t - 1).transpose();
    bundle.cross_bias = std::move(dec);
  }
  return bundle;
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

Eigen::MatrixXd pad_mask_matrix(const std::vector<std::uint8_t>& key_pad, Index rows,
                                bool causal) {
  const Index cols = static_cast<Index>(key_pad.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols == 0 && causal ? rows : cols);
  if (cols > 0)
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = key_pad[j] ? 1.0 : 0.0;
  if (causal)
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = i + 1; j < m.cols(); ++j) m(i, j) = 1.0;
  return m;
}

bool any_set(const std::vector<std::uint8_t>& v) {
  for (auto x : v)
    if (x) return true;
  return false;
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& bias,
                 const Tensor& mask, const Tensor& rel) {
  const Index dk = q.shape().back();
  Tensor scores = matmul(q, transpose_last2(k));
  if (rel.defined()) scores = add(scores, rel);
  scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(dk)));
  if (bias.defined()) scores = add(scores, bias);
  if (mask.defined()) scores = masked_fill(scores, mask, -1e9);
  return matmul(softmax_lastdim(scores), v);
}

Model::Model(ModelConfig cfg, ModelParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  return Model(cfg, ModelParams::init(cfg, seed));
}

namespace {

struct SublayerCtx {
  const ModelConfig& cfg;
  DropoutStream* stream;

  Tensor drop(const Tensor& x) const {
    if (!stream || cfg.dropout == 0.0) return x;
    return dropout(x, cfg.dropout, stream->next());
  }
};

// One multi-head attention sublayer. rel/bias/mask may be undefined.
Tensor mha(const SublayerCtx& ctx, const AttentionParams& p, const Tensor& queries,
           const Tensor& keys_values, const Tensor& bias, const Tensor& mask,
           bool use_rel) {
  const int heads = ctx.cfg.heads;
  Tensor qh = split_heads(linear(queries, p.wq, p.bq), heads);
  Tensor kh = split_heads(linear(keys_values, p.wk, p.bk), heads);
  Tensor vh = split_heads(linear(keys_values, p.wv, p.bv), heads);

  Tensor rel;
  if (use_rel)
    rel = relative_position_logits(qh, p.rel, ctx.cfg.max_relative_distance,
                                   keys_values.dim(0));

  const Index dk = qh.shape().back();
  Tensor scores = matmul(qh, transpose_last2(kh));
  if (rel.defined()) scores = add(scores, rel);
  scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(dk)));
  if (bias.defined()) scores = add(scores, bias);
  if (mask.defined()) scores = masked_fill(scores, mask, -1e9);
  Tensor weights = ctx.drop(softmax_lastdim(scores));
  return linear(merge_heads(matmul(weights, vh)), p.wo, p.bo);
}

Tensor feed_forward(const SublayerCtx& ctx, const FeedForwardParams& p, const Tensor& x) {
  return linear(ctx.drop(relu(linear(x, p.w1, p.b1))), p.w2, p.b2);
}

}  // namespace

Tensor Model::encode(const std::vector<int>& src_ids, const AttentionBiasBundle& priors,
                     DropoutStream* stream) const {
  if (src_ids.empty()) throw std::invalid_argument("encode: empty input");
  SublayerCtx ctx{cfg_, stream};

  Tensor x = scale(embedding_lookup(params_.embedding, src_ids),
                   std::sqrt(static_cast<double>(cfg_.d_model)));
  x = ctx.drop(x);

  Tensor bias;
  if (priors.enc_self_bias) {
    if (priors.enc_self_bias->rows() != static_cast<Index>(src_ids.size()))
      throw ShapeMismatch("encode: enc_self_bias does not match the input length");
    bias = Tensor::from_matrix(*priors.enc_self_bias);
  }
  Tensor mask;
  if (any_set(priors.src_pad))
    mask = Tensor::from_matrix(
        pad_mask_matrix(priors.src_pad, static_cast<Index>(src_ids.size()), false));

  for (const auto& layer : params_.enc) {
    x = layer_norm(add(x, ctx.drop(mha(ctx, layer.self, x, x, bias, mask, true))),
                   layer.ln1.gain, layer.ln1.bias);
    x = layer_norm(add(x, ctx.drop(feed_forward(ctx, layer.ff, x))), layer.ln2.gain,
                   layer.ln2.bias);
  }
  return x;
}

Tensor Model::decode(const Tensor& memory, const std::vector<int>& tgt_in_ids,
                     const AttentionBiasBundle& priors, DropoutStream* stream) const {
  if (tgt_in_ids.empty()) throw std::invalid_argument("decode: empty target prefix");
  SublayerCtx ctx{cfg_, stream};
  const Index t_y = static_cast<Index>(tgt_in_ids.size());

  Tensor y = scale(embedding_lookup(params_.embedding, tgt_in_ids),
                   std::sqrt(static_cast<double>(cfg_.d_model)));
  y = ctx.drop(y);

  // Decoder self-attention: causal, plus target padding if any.
  Tensor self_mask = Tensor::from_matrix(pad_mask_matrix(priors.tgt_pad, t_y, true));

  Tensor cross_bias;
  if (priors.cross_bias) {
    if (priors.cross_bias->rows() != t_y || priors.cross_bias->cols() != memory.dim(0))
      throw ShapeMismatch("decode: cross_bias shape does not match target/memory lengths");
    cross_bias = Tensor::from_matrix(*priors.cross_bias);
  }
  Tensor cross_mask;
  if (any_set(priors.src_pad))
    cross_mask = Tensor::from_matrix(pad_mask_matrix(priors.src_pad, t_y, false));

  for (const auto& layer : params_.dec) {
    y = layer_norm(
        add(y, ctx.drop(mha(ctx, layer.self, y, y, Tensor(), self_mask, true))),
        layer.ln1.gain, layer.ln1.bias);
    y = layer_norm(
        add(y, ctx.drop(mha(ctx, layer.cross, y, memory, cross_bias, cross_mask, false))),
        layer.ln2.gain, layer.ln2.bias);
    y = layer_norm(add(y, ctx.drop(feed_forward(ctx, layer.ff, y))), layer.ln3.gain,
                   layer.ln3.bias);
  }

  // Tied output projection.
  return matmul(y, transpose_last2(params_.embedding));
}

Eigen::VectorXd Model::decode_step(const Tensor& memory, const std::vector<int>& prefix,
                                   const AttentionBiasBundle& priors) const {
  if (prefix.empty()) throw std::invalid_argument("decode_step: prefix must start with BOS");
  AttentionBiasBundle step_priors;
  step_priors.src_pad = priors.src_pad;  // cross bias and target pads do not apply
  Tensor logits = decode(memory, prefix, step_priors, nullptr);
  const Index vocab = logits.dim(1);
  const Index last = logits.dim(0) - 1;
  Eigen::VectorXd row(vocab);
  for (Index j = 0; j < vocab; ++j) row[j] = logits.data()[last * vocab + j];
  return row;
}

}  // namespace retro
