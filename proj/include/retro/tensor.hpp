// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensors with reverse-mode autodiff. Eigen supplies all the
// math; the tape records ops in execution order (already topological) and
// backward() replays it in reverse. With no active tape, ops run forward
// only and retain nothing, which is the inference path.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "retro/errors.hpp"

namespace retro {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);

struct TensorNode {
  Shape shape;
  Eigen::ArrayXd value;
  Eigen::ArrayXd grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // pushes grad into parents
  class Tape* tape = nullptr;

  void accumulate(const Eigen::ArrayXd& g);
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor from_matrix(const Eigen::MatrixXd& m, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index size() const { return node_->value.size(); }
  Index dim(Index i) const { return node_->shape[static_cast<std::size_t>(i)]; }

  Eigen::ArrayXd& data() { return node_->value; }
  const Eigen::ArrayXd& data() const { return node_->value; }
  Eigen::ArrayXd& grad() { return node_->grad; }
  const Eigen::ArrayXd& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() > 0; }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool value) {
    node_->requires_grad = value;
    return *this;
  }

  double item() const;                            // scalar tensors only
  double at(std::initializer_list<Index>) const;  // row-major indexing
  Eigen::MatrixXd matrix() const;                 // rank-2 tensors only

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// RAII recording scope; the innermost live Tape on this thread records.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();
  void record(std::shared_ptr<TensorNode> node);
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<TensorNode>>& nodes() const { return nodes_; }

 private:
  std::vector<std::shared_ptr<TensorNode>> nodes_;
  Tape* previous_;
};

// When enabled, every op checks its output for NaN/Inf and throws
// NonFiniteValue. Off by default; tests and NonFiniteLoss diagnostics use it.
void set_debug_checks(bool enabled);
bool debug_checks_enabled();

// ---- primitives -----------------------------------------------------------

// Batched over equal leading dims; the last two dims multiply as matrices.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise; b may also be a suffix of a's shape (broadcast over leading
// dims). No other broadcasting exists.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // same shape only
Tensor scale(const Tensor& a, double c);

Tensor transpose_last2(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor softmax_lastdim(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);  // scalar

// Fills positions where mask is nonzero; mask may suffix-broadcast and is
// treated as a constant.
Tensor masked_fill(const Tensor& a, const Tensor& mask, double value);

// Normalizes the last dim; gain/bias are vectors of that length.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// Inverted scaling with a counter-based RNG: fixed (p, seed) gives the same
// mask on every run. p == 0 returns the input unchanged.
Tensor dropout(const Tensor& a, double p, std::uint64_t seed);

enum class Reduction { Mean, Sum };

// Mean (or sum) over rows whose target is not ignore_id of
// -log p(target | row); optional uniform label smoothing.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_id,
                     double label_smoothing = 0.0, Reduction reduction = Reduction::Mean);

// (heads, T, d_model/heads) <-> (T, d_model)
Tensor split_heads(const Tensor& a, Index heads);
Tensor merge_heads(const Tensor& a);

// rel[h,i,j] = q[h,i,:] . table[clip(j-i, -c, c) + c, :]
Tensor relative_position_logits(const Tensor& q, const Tensor& table, Index clip, Index key_len);

// Reverse sweep from a scalar loss over the tape it was recorded on.
// Repeated calls without zero_grad accumulate into existing grads.
void backward(const Tensor& loss);

}  // namespace retro
