// SPDX-License-Identifier: Apache-2.0
#include "retro/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "retro/rng.hpp"

namespace retro {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

bool g_debug_checks = false;

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                      shape_string(b));
}

std::shared_ptr<TensorNode> make_node(Shape shape, Eigen::ArrayXd value) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  return node;
}

void check_finite(const char* op, const TensorNode& node) {
  if (!g_debug_checks) return;
  if (!node.value.allFinite())
    throw NonFiniteValue(std::string(op) + " produced a non-finite value");
}

// Attaches autodiff bookkeeping when a tape is live and some input needs
// gradients; otherwise the result is a detached constant.
Tensor finish(const char* op, std::shared_ptr<TensorNode> node,
              std::vector<std::shared_ptr<TensorNode>> parents,
              std::function<void(TensorNode&)> backward_fn) {
  check_finite(op, *node);
  Tape* tape = Tape::current();
  bool needs = false;
  if (tape)
    for (const auto& p : parents)
      if (p->requires_grad) {
        needs = true;
        break;
      }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
    node->tape = tape;
    tape->record(node);
  }
  return Tensor(std::move(node));
}

Index leading_count(const Shape& shape, std::size_t trailing) {
  Index count = 1;
  for (std::size_t i = 0; i + trailing < shape.size(); ++i) count *= shape[i];
  return count;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
  return true;
}

thread_local Tape* g_current_tape = nullptr;

}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

void TensorNode::accumulate(const Eigen::ArrayXd& g) {
  if (grad.size() == 0)
    grad = g;
  else
    grad += g;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = make_node(shape, Eigen::ArrayXd::Zero(shape_size(shape)));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = make_node(shape, Eigen::ArrayXd::Constant(shape_size(shape), value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (static_cast<Index>(data.size()) != shape_size(shape))
    throw ShapeMismatch("from_data: " + std::to_string(data.size()) + " values for shape " +
                        shape_string(shape));
  Eigen::ArrayXd value(data.size());
  std::copy(data.begin(), data.end(), value.data());
  auto node = make_node(std::move(shape), std::move(value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m, bool requires_grad) {
  Eigen::ArrayXd value(m.size());
  MapRM(value.data(), m.rows(), m.cols()) = m;
  auto node = make_node({m.rows(), m.cols()}, std::move(value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

void Tensor::zero_grad() { node_->grad.resize(0); }

double Tensor::item() const {
  if (size() != 1) throw NonScalarLoss("item: tensor has " + std::to_string(size()) + " elements");
  return node_->value[0];
}

double Tensor::at(std::initializer_list<Index> indices) const {
  const Shape& s = node_->shape;
  if (indices.size() != s.size()) throw ShapeMismatch("at: wrong index rank");
  Index offset = 0;
  std::size_t k = 0;
  for (Index i : indices) {
    offset = offset * s[k] + i;
    ++k;
  }
  return node_->value[offset];
}

Eigen::MatrixXd Tensor::matrix() const {
  if (rank() != 2) throw ShapeMismatch("matrix: tensor rank is not 2");
  return CMapRM(node_->value.data(), dim(0), dim(1));
}

Tape::Tape() : previous_(g_current_tape) { g_current_tape = this; }

Tape::~Tape() { g_current_tape = previous_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::shared_ptr<TensorNode> node) { nodes_.push_back(std::move(node)); }

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks_enabled() { return g_debug_checks; }

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() != sa.size()) shape_fail("matmul", sa, sb);
  for (std::size_t i = 0; i + 2 < sa.size(); ++i)
    if (sa[i] != sb[i]) shape_fail("matmul", sa, sb);
  const Index m = sa[sa.size() - 2], k = sa[sa.size() - 1];
  const Index k2 = sb[sb.size() - 2], n = sb[sb.size() - 1];
  if (k != k2) shape_fail("matmul", sa, sb);
  const Index batches = leading_count(sa, 2);

  Shape out_shape(sa.begin(), sa.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  Eigen::ArrayXd out(batches * m * n);
  for (Index l = 0; l < batches; ++l) {
    CMapRM A(a.data().data() + l * m * k, m, k);
    CMapRM B(b.data().data() + l * k * n, k, n);
    MapRM C(out.data() + l * m * n, m, n);
    C.noalias() = A * B;
  }

  auto an = a.node(), bn = b.node();
  return finish("matmul", make_node(std::move(out_shape), std::move(out)), {an, bn},
                [an, bn, batches, m, k, n](TensorNode& node) {
                  if (an->requires_grad) {
                    if (an->grad.size() == 0) an->grad = Eigen::ArrayXd::Zero(an->value.size());
                    for (Index l = 0; l < batches; ++l) {
                      CMapRM G(node.grad.data() + l * m * n, m, n);
                      CMapRM B(bn->value.data() + l * k * n, k, n);
                      MapRM dA(an->grad.data() + l * m * k, m, k);
                      dA.noalias() += G * B.transpose();
                    }
                  }
                  if (bn->requires_grad) {
                    if (bn->grad.size() == 0) bn->grad = Eigen::ArrayXd::Zero(bn->value.size());
                    for (Index l = 0; l < batches; ++l) {
                      CMapRM G(node.grad.data() + l * m * n, m, n);
                      CMapRM A(an->value.data() + l * m * k, m, k);
                      MapRM dB(bn->grad.data() + l * k * n, k, n);
                      dB.noalias() += A.transpose() * G;
                    }
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (!is_suffix(sb, sa)) shape_fail("add", sa, sb);
  const Index block = b.size();
  const Index blocks = a.size() / std::max<Index>(block, 1);

  Eigen::ArrayXd out = a.data();
  for (Index l = 0; l < blocks; ++l) out.segment(l * block, block) += b.data();

  auto an = a.node(), bn = b.node();
  return finish("add", make_node(sa, std::move(out)), {an, bn},
                [an, bn, block, blocks](TensorNode& node) {
                  if (an->requires_grad) an->accumulate(node.grad);
                  if (bn->requires_grad) {
                    Eigen::ArrayXd gb = Eigen::ArrayXd::Zero(block);
                    for (Index l = 0; l < blocks; ++l) gb += node.grad.segment(l * block, block);
                    bn->accumulate(gb);
                  }
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  Eigen::ArrayXd out = a.data() * b.data();
  auto an = a.node(), bn = b.node();
  return finish("mul", make_node(a.shape(), std::move(out)), {an, bn},
                [an, bn](TensorNode& node) {
                  if (an->requires_grad) an->accumulate(node.grad * bn->value);
                  if (bn->requires_grad) bn->accumulate(node.grad * an->value);
                });
}

Tensor scale(const Tensor& a, double c) {
  Eigen::ArrayXd out = a.data() * c;
  auto an = a.node();
  return finish("scale", make_node(a.shape(), std::move(out)), {an},
                [an, c](TensorNode& node) {
                  if (an->requires_grad) an->accumulate((node.grad * c).eval());
                });
}

Tensor transpose_last2(const Tensor& a) {
  const Shape& sa = a.shape();
  if (sa.size() < 2) shape_fail("transpose_last2", sa, sa);
  const Index r = sa[sa.size() - 2], c = sa[sa.size() - 1];
  const Index batches = leading_count(sa, 2);

  Shape out_shape = sa;
  std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
  Eigen::ArrayXd out(a.size());
  for (Index l = 0; l < batches; ++l) {
    CMapRM A(a.data().data() + l * r * c, r, c);
    MapRM T(out.data() + l * r * c, c, r);
    T = A.transpose();
  }

  auto an = a.node();
  return finish("transpose_last2", make_node(std::move(out_shape), std::move(out)), {an},
                [an, r, c, batches](TensorNode& node) {
                  if (!an->requires_grad) return;
                  if (an->grad.size() == 0) an->grad = Eigen::ArrayXd::Zero(an->value.size());
                  for (Index l = 0; l < batches; ++l) {
                    CMapRM G(node.grad.data() + l * r * c, c, r);
                    MapRM dA(an->grad.data() + l * r * c, r, c);
                    dA += G.transpose();
                  }
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_fail("reshape", a.shape(), shape);
  auto an = a.node();
  return finish("reshape", make_node(std::move(shape), a.data()), {an},
                [an](TensorNode& node) {
                  if (an->requires_grad) an->accumulate(node.grad);
                });
}

Tensor softmax_lastdim(const Tensor& a) {
  const Shape& sa = a.shape();
  if (sa.empty()) shape_fail("softmax_lastdim", sa, sa);
  const Index width = sa.back();
  const Index rows = a.size() / width;

  Eigen::ArrayXd out(a.size());
  for (Index r = 0; r < rows; ++r) {
    auto x = a.data().segment(r * width, width);
    auto y = out.segment(r * width, width);
    const double m = x.maxCoeff();
    y = (x - m).exp();
    y /= y.sum();
  }

  auto an = a.node();
  auto node = make_node(sa, std::move(out));
  // dx = y * (dy - dot(dy, y)) per row
  return finish("softmax_lastdim", node, {an}, [an, rows, width](TensorNode& n) {
    if (!an->requires_grad) return;
    Eigen::ArrayXd dx(n.value.size());
    for (Index r = 0; r < rows; ++r) {
      auto y = n.value.segment(r * width, width);
      auto dy = n.grad.segment(r * width, width);
      const double dot = (dy * y).sum();
      dx.segment(r * width, width) = y * (dy - dot);
    }
    an->accumulate(dx);
  });
}

Tensor relu(const Tensor& a) {
  Eigen::ArrayXd out = a.data().max(0.0);
  auto an = a.node();
  return finish("relu", make_node(a.shape(), std::move(out)), {an},
                [an](TensorNode& node) {
                  if (!an->requires_grad) return;
                  an->accumulate((node.grad * (an->value > 0.0).cast<double>()).eval());
                });
}

Tensor sum(const Tensor& a) {
  Eigen::ArrayXd out(1);
  out[0] = a.data().sum();
  auto an = a.node();
  return finish("sum", make_node({1}, std::move(out)), {an},
                [an](TensorNode& node) {
                  if (an->requires_grad)
                    an->accumulate(Eigen::ArrayXd::Constant(an->value.size(), node.grad[0]));
                });
}

Tensor masked_fill(const Tensor& a, const Tensor& mask, double value) {
  if (!is_suffix(mask.shape(), a.shape())) shape_fail("masked_fill", a.shape(), mask.shape());
  const Index block = mask.size();
  const Index blocks = a.size() / std::max<Index>(block, 1);

  Eigen::ArrayXd out = a.data();
  for (Index l = 0; l < blocks; ++l) {
    auto seg = out.segment(l * block, block);
    seg = (mask.data() != 0.0).select(value, seg);
  }

  auto an = a.node();
  auto mn = mask.node();
  return finish("masked_fill", make_node(a.shape(), std::move(out)), {an},
                [an, mn, block, blocks](TensorNode& node) {
                  if (!an->requires_grad) return;
                  Eigen::ArrayXd g = node.grad;
                  for (Index l = 0; l < blocks; ++l) {
                    auto seg = g.segment(l * block, block);
                    seg = (mn->value != 0.0).select(0.0, seg);
                  }
                  an->accumulate(g);
                });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  const Shape& sa = a.shape();
  if (sa.empty()) shape_fail("layer_norm", sa, sa);
  const Index width = sa.back();
  if (gain.size() != width || bias.size() != width)
    shape_fail("layer_norm", sa, gain.shape());
  const Index rows = a.size() / width;
  constexpr double kEps = 1e-5;

  Eigen::ArrayXd xhat(a.size());
  Eigen::ArrayXd inv_std(rows);
  Eigen::ArrayXd out(a.size());
  for (Index r = 0; r < rows; ++r) {
    auto x = a.data().segment(r * width, width);
    const double mean = x.mean();
    const double var = (x - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + kEps);
    xhat.segment(r * width, width) = (x - mean) * inv_std[r];
    out.segment(r * width, width) = xhat.segment(r * width, width) * gain.data() + bias.data();
  }

  auto an = a.node(), gn = gain.node(), bn = bias.node();
  auto xhat_ptr = std::make_shared<Eigen::ArrayXd>(std::move(xhat));
  auto inv_ptr = std::make_shared<Eigen::ArrayXd>(std::move(inv_std));
  return finish(
      "layer_norm", make_node(sa, std::move(out)), {an, gn, bn},
      [an, gn, bn, xhat_ptr, inv_ptr, rows, width](TensorNode& node) {
        if (gn->requires_grad) {
          Eigen::ArrayXd dg = Eigen::ArrayXd::Zero(width);
          for (Index r = 0; r < rows; ++r)
            dg += node.grad.segment(r * width, width) * xhat_ptr->segment(r * width, width);
          gn->accumulate(dg);
        }
        if (bn->requires_grad) {
          Eigen::ArrayXd db = Eigen::ArrayXd::Zero(width);
          for (Index r = 0; r < rows; ++r) db += node.grad.segment(r * width, width);
          bn->accumulate(db);
        }
        if (an->requires_grad) {
          Eigen::ArrayXd dx(node.value.size());
          for (Index r = 0; r < rows; ++r) {
            auto dy = node.grad.segment(r * width, width);
            auto xh = xhat_ptr->segment(r * width, width);
            Eigen::ArrayXd dxhat = dy * gn->value;
            const double mean_dxhat = dxhat.mean();
            const double mean_dxhat_xhat = (dxhat * xh).mean();
            dx.segment(r * width, width) =
                (*inv_ptr)[r] * (dxhat - mean_dxhat - xh * mean_dxhat_xhat);
          }
          an->accumulate(dx);
        }
      });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  const Shape& st = table.shape();
  if (st.size() != 2) shape_fail("embedding_lookup", st, st);
  const Index vocab = st[0], width = st[1];
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw ShapeMismatch("embedding_lookup: id " + std::to_string(id) +
                          " outside table of size " + std::to_string(vocab));

  const Index n = static_cast<Index>(ids.size());
  Eigen::ArrayXd out(n * width);
  for (Index t = 0; t < n; ++t)
    out.segment(t * width, width) = table.data().segment(ids[t] * width, width);

  auto tn = table.node();
  return finish("embedding_lookup", make_node({n, width}, std::move(out)), {tn},
                [tn, ids, width](TensorNode& node) {
                  if (!tn->requires_grad) return;
                  if (tn->grad.size() == 0) tn->grad = Eigen::ArrayXd::Zero(tn->value.size());
                  for (Index t = 0; t < static_cast<Index>(ids.size()); ++t)
                    tn->grad.segment(ids[t] * width, width) +=
                        node.grad.segment(t * width, width);
                });
}

Tensor dropout(const Tensor& a, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0)
    throw ShapeMismatch("dropout: p must be in [0,1), got " + std::to_string(p));
  if (p == 0.0) return a;

  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<Eigen::ArrayXd>(a.size());
  for (Index i = 0; i < a.size(); ++i)
    (*mask)[i] = uniform_at(seed, static_cast<std::uint64_t>(i)) >= p ? keep_scale : 0.0;

  Eigen::ArrayXd out = a.data() * (*mask);
  auto an = a.node();
  return finish("dropout", make_node(a.shape(), std::move(out)), {an},
                [an, mask](TensorNode& node) {
                  if (an->requires_grad) an->accumulate((node.grad * (*mask)).eval());
                });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_id,
                     double label_smoothing, Reduction reduction) {
  const Shape& sl = logits.shape();
  if (sl.size() != 2) shape_fail("cross_entropy", sl, sl);
  const Index rows = sl[0], vocab = sl[1];
  if (static_cast<Index>(targets.size()) != rows)
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(rows) + " rows");

  double total = 0.0;
  Index counted = 0;
  for (Index r = 0; r < rows; ++r) {
    const int y = targets[r];
    if (y == ignore_id) continue;
    if (y < 0 || y >= vocab)
      throw ShapeMismatch("cross_entropy: target " + std::to_string(y) + " outside vocab");
    auto x = logits.data().segment(r * vocab, vocab);
    const double m = x.maxCoeff();
    const double log_z = m + std::log((x - m).exp().sum());
    total += log_z - (1.0 - label_smoothing) * x[y] -
             (label_smoothing / static_cast<double>(vocab)) * x.sum();
    ++counted;
  }
  const double denom = reduction == Reduction::Mean ? std::max<Index>(counted, 1) : 1;
  Eigen::ArrayXd out(1);
  out[0] = total / denom;

  auto ln = logits.node();
  return finish(
      "cross_entropy", make_node({1}, std::move(out)), {ln},
      [ln, targets, ignore_id, label_smoothing, denom, rows, vocab](TensorNode& node) {
        if (!ln->requires_grad) return;
        const double g = node.grad[0] / denom;
        Eigen::ArrayXd dx = Eigen::ArrayXd::Zero(ln->value.size());
        for (Index r = 0; r < rows; ++r) {
          const int y = targets[r];
          if (y == ignore_id) continue;
          auto x = ln->value.segment(r * vocab, vocab);
          auto d = dx.segment(r * vocab, vocab);
          const double m = x.maxCoeff();
          Eigen::ArrayXd p = (x - m).exp();
          p /= p.sum();
          d = g * (p - label_smoothing / static_cast<double>(vocab));
          d[y] -= g * (1.0 - label_smoothing);
        }
        ln->accumulate(dx);
      });
}

Tensor split_heads(const Tensor& a, Index heads) {
  const Shape& sa = a.shape();
  if (sa.size() != 2 || sa[1] % heads != 0) shape_fail("split_heads", sa, {heads});
  const Index t = sa[0], width = sa[1], dk = width / heads;

  Eigen::ArrayXd out(a.size());
  for (Index h = 0; h < heads; ++h)
    for (Index i = 0; i < t; ++i)
      out.segment((h * t + i) * dk, dk) = a.data().segment(i * width + h * dk, dk);

  auto an = a.node();
  return finish("split_heads", make_node({heads, t, dk}, std::move(out)), {an},
                [an, heads, t, dk, width](TensorNode& node) {
                  if (!an->requires_grad) return;
                  if (an->grad.size() == 0) an->grad = Eigen::ArrayXd::Zero(an->value.size());
                  for (Index h = 0; h < heads; ++h)
                    for (Index i = 0; i < t; ++i)
                      an->grad.segment(i * width + h * dk, dk) +=
                          node.grad.segment((h * t + i) * dk, dk);
                });
}

Tensor merge_heads(const Tensor& a) {
  const Shape& sa = a.shape();
  if (sa.size() != 3) shape_fail("merge_heads", sa, sa);
  const Index heads = sa[0], t = sa[1], dk = sa[2], width = heads * dk;

  Eigen::ArrayXd out(a.size());
  for (Index h = 0; h < heads; ++h)
    for (Index i = 0; i < t; ++i)
      out.segment(i * width + h * dk, dk) = a.data().segment((h * t + i) * dk, dk);

  auto an = a.node();
  return finish("merge_heads", make_node({t, width}, std::move(out)), {an},
                [an, heads, t, dk, width](TensorNode& node) {
                  if (!an->requires_grad) return;
                  if (an->grad.size() == 0) an->grad = Eigen::ArrayXd::Zero(an->value.size());
                  for (Index h = 0; h < heads; ++h)
                    for (Index i = 0; i < t; ++i)
                      an->grad.segment((h * t + i) * dk, dk) +=
                          node.grad.segment(i * width + h * dk, dk);
                });
}

Tensor relative_position_logits(const Tensor& q, const Tensor& table, Index clip,
                                Index key_len) {
  const Shape& sq = q.shape();
  const Shape& st = table.shape();
  if (sq.size() != 3 || st.size() != 2) shape_fail("relative_position_logits", sq, st);
  const Index heads = sq[0], t_q = sq[1], dk = sq[2];
  if (st[0] != 2 * clip + 1 || st[1] != dk) shape_fail("relative_position_logits", sq, st);

  auto bucket = [clip](Index i, Index j) {
    Index off = j - i;
    if (off > clip) off = clip;
    if (off < -clip) off = -clip;
    return off + clip;
  };

  Eigen::ArrayXd out(heads * t_q * key_len);
  for (Index h = 0; h < heads; ++h)
    for (Index i = 0; i < t_q; ++i) {
      auto qi = q.data().segment((h * t_q + i) * dk, dk);
      for (Index j = 0; j < key_len; ++j) {
        auto rel = table.data().segment(bucket(i, j) * dk, dk);
        out[(h * t_q + i) * key_len + j] = (qi * rel).sum();
      }
    }

  auto qn = q.node(), tn = table.node();
  return finish(
      "relative_position_logits", make_node({heads, t_q, key_len}, std::move(out)), {qn, tn},
      [qn, tn, heads, t_q, dk, key_len, bucket](TensorNode& node) {
        const bool need_q = qn->requires_grad, need_t = tn->requires_grad;
        if (need_q && qn->grad.size() == 0) qn->grad = Eigen::ArrayXd::Zero(qn->value.size());
        if (need_t && tn->grad.size() == 0) tn->grad = Eigen::ArrayXd::Zero(tn->value.size());
        for (Index h = 0; h < heads; ++h)
          for (Index i = 0; i < t_q; ++i)
            for (Index j = 0; j < key_len; ++j) {
              const double g = node.grad[(h * t_q + i) * key_len + j];
              if (g == 0.0) continue;
              const Index b = bucket(i, j);
              if (need_q)
                qn->grad.segment((h * t_q + i) * dk, dk) +=
                    g * tn->value.segment(b * dk, dk);
              if (need_t)
                tn->grad.segment(b * dk, dk) +=
                    g * qn->value.segment((h * t_q + i) * dk, dk);
            }
      });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw NonScalarLoss("backward: loss must be a defined scalar tensor");
  TensorNode* root = loss.node().get();
  Tape* tape = root->tape;
  if (!tape) {
    if (!root->requires_grad) return;  // constant loss: nothing depends on parameters
    throw NonScalarLoss("backward: loss was not recorded on a live tape");
  }

  // Nodes that influence the loss.
  std::unordered_set<const TensorNode*> needed;
  std::vector<const TensorNode*> stack{root};
  needed.insert(root);
  while (!stack.empty()) {
    const TensorNode* n = stack.back();
    stack.pop_back();
    for (const auto& p : n->parents)
      if (p->backward_fn && needed.insert(p.get()).second) stack.push_back(p.get());
  }

  root->accumulate(Eigen::ArrayXd::Ones(1));
  const auto& nodes = tape->nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    TensorNode* n = it->get();
    if (!needed.count(n) || !n->backward_fn) continue;
    if (n->grad.size() == 0) continue;  // no downstream influence
    n->backward_fn(*n);
    if (n != root) n->grad.resize(0);  // interior grads are transient
  }
}

}  // namespace retro
