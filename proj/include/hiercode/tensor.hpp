/*
 * Copyright 2026 The hiercode Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense 2-D tensors with reverse-mode differentiation.
//
// A tensor is a shared handle to a graph node holding an Eigen matrix. Ops
// record their parents and a backward rule; `backward(loss)` orders the
// reachable subgraph topologically (the tape) and replays the rules in
// reverse. Leaf gradients accumulate across calls until `zero_grad`.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hiercode {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = RowMatrix<double>;
using Index = Eigen::Index;

template <typename Scalar>
class BasicTensor;

namespace detail {

template <typename Scalar>
struct Node {
  using Mat = RowMatrix<Scalar>;
  Mat value;
  Mat grad;  // empty until first touched by backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads `grad` of this node and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Mat::Zero(value.rows(), value.cols());
    }
  }
};

inline std::string shape_str(Index r, Index c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

}  // namespace detail

template <typename Scalar>
class BasicTensor {
 public:
  using Mat = RowMatrix<Scalar>;
  using NodeT = detail::Node<Scalar>;

  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<NodeT> node) : node_(std::move(node)) {}

  static BasicTensor constant(Mat value) {
    auto n = std::make_shared<NodeT>();
    n->value = std::move(value);
    return BasicTensor(std::move(n));
  }

  static BasicTensor parameter(Mat value) {
    auto n = std::make_shared<NodeT>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    return BasicTensor(std::move(n));
  }

  static BasicTensor scalar(Scalar v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  Index size() const { return node_->value.size(); }

  const Mat& value() const { return node_->value; }
  // Mutation is reserved for optimizers and finite-difference probes.
  Mat& mutable_value() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }

  // Zero-filled when backward never reached this tensor.
  Mat grad() const {
    if (node_->grad.rows() == rows() && node_->grad.cols() == cols()) {
      return node_->grad;
    }
    return Mat::Zero(rows(), cols());
  }
  Mat& mutable_grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() const { node_->grad = Mat::Zero(rows(), cols()); }

  Scalar item() const {
    if (size() != 1) {
      throw ContractError("item() on non-scalar tensor " +
                          detail::shape_str(rows(), cols()));
    }
    return node_->value(0, 0);
  }

  std::string shape_string() const { return detail::shape_str(rows(), cols()); }

  const std::shared_ptr<NodeT>& node() const { return node_; }

 private:
  std::shared_ptr<NodeT> node_;
};

using Tensor = BasicTensor<double>;

// The recorded operations reachable from a loss, in forward (topological)
// order. Replaying backward walks it in reverse.
template <typename Scalar>
class BasicTape {
 public:
  using NodeT = detail::Node<Scalar>;

  explicit BasicTape(const BasicTensor<Scalar>& root) {
    std::unordered_set<const NodeT*> seen;
    // Iterative post-order DFS.
    std::vector<std::pair<NodeT*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        NodeT* p = node->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) {
          stack.emplace_back(p, 0);
        }
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::size_t size() const { return order_.size(); }

  void replay(const BasicTensor<Scalar>& root) {
    for (NodeT* n : order_) {
      if (n->backward_fn) n->grad.resize(0, 0);  // interior: fresh buffer
      n->ensure_grad();
    }
    root.node()->grad.setOnes();
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
  }

 private:
  std::vector<NodeT*> order_;
};

using Tape = BasicTape<double>;

template <typename Scalar>
void backward(const BasicTensor<Scalar>& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        loss.shape_string());
  }
  if (!loss.requires_grad()) return;
  BasicTape<Scalar> tape(loss);
  tape.replay(loss);
}

namespace ops {

namespace detail {

template <typename Scalar>
BasicTensor<Scalar> make_result(
    RowMatrix<Scalar> value,
    std::vector<std::shared_ptr<hiercode::detail::Node<Scalar>>> parents,
    std::function<void(hiercode::detail::Node<Scalar>&)> backward_fn) {
  auto n = std::make_shared<hiercode::detail::Node<Scalar>>();
  n->value = std::move(value);
  bool any = std::any_of(parents.begin(), parents.end(),
                         [](const auto& p) { return p->requires_grad; });
  if (any) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return BasicTensor<Scalar>(std::move(n));
}

template <typename Scalar>
void accumulate(hiercode::detail::Node<Scalar>& p,
                const RowMatrix<Scalar>& g) {
  if (!p.requires_grad) return;
  p.ensure_grad();
  p.grad += g;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail

template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a,
                           const BasicTensor<Scalar>& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ " +
                                            a.shape_string() + " x " +
                                            b.shape_string());
  RowMatrix<Scalar> out = a.value() * b.value();
  return detail::make_result<Scalar>(
      std::move(out), {a.node(), b.node()}, [](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) detail::accumulate(pa, RowMatrix<Scalar>(self.grad * pb.value.transpose()));
        if (pb.requires_grad) detail::accumulate(pb, RowMatrix<Scalar>(pa.value.transpose() * self.grad));
      });
}

template <typename Scalar>
BasicTensor<Scalar> transpose(const BasicTensor<Scalar>& a) {
  return detail::make_result<Scalar>(
      a.value().transpose(), {a.node()}, [](auto& self) {
        detail::accumulate(*self.parents[0],
                           RowMatrix<Scalar>(self.grad.transpose()));
      });
}

template <typename Scalar>
BasicTensor<Scalar> add(const BasicTensor<Scalar>& a,
                        const BasicTensor<Scalar>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "add: shape mismatch " + a.shape_string() + " vs " +
                      b.shape_string());
  return detail::make_result<Scalar>(
      a.value() + b.value(), {a.node(), b.node()}, [](auto& self) {
        detail::accumulate(*self.parents[0], self.grad);
        detail::accumulate(*self.parents[1], self.grad);
      });
}

// a[r×c] + row[1×c] broadcast down the rows (bias add).
template <typename Scalar>
BasicTensor<Scalar> add_row(const BasicTensor<Scalar>& a,
                            const BasicTensor<Scalar>& row) {
  detail::require(row.rows() == 1 && row.cols() == a.cols(),
                  "add_row: expected [1x" + std::to_string(a.cols()) +
                      "] bias, got " + row.shape_string());
  RowMatrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return detail::make_result<Scalar>(
      std::move(out), {a.node(), row.node()}, [](auto& self) {
        detail::accumulate(*self.parents[0], self.grad);
        detail::accumulate(*self.parents[1],
                           RowMatrix<Scalar>(self.grad.colwise().sum()));
      });
}

template <typename Scalar>
BasicTensor<Scalar> mul(const BasicTensor<Scalar>& a,
                        const BasicTensor<Scalar>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "mul: shape mismatch " + a.shape_string() + " vs " +
                      b.shape_string());
  return detail::make_result<Scalar>(
      a.value().cwiseProduct(b.value()), {a.node(), b.node()},
      [](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) detail::accumulate(pa, RowMatrix<Scalar>(self.grad.cwiseProduct(pb.value)));
        if (pb.requires_grad) detail::accumulate(pb, RowMatrix<Scalar>(self.grad.cwiseProduct(pa.value)));
      });
}

template <typename Scalar>
BasicTensor<Scalar> scale(const BasicTensor<Scalar>& a, Scalar s) {
  return detail::make_result<Scalar>(
      a.value() * s, {a.node()}, [s](auto& self) {
        detail::accumulate(*self.parents[0], RowMatrix<Scalar>(self.grad * s));
      });
}

template <typename Scalar>
BasicTensor<Scalar> tanh(const BasicTensor<Scalar>& a) {
  RowMatrix<Scalar> out = a.value().array().tanh().matrix();
  return detail::make_result<Scalar>(std::move(out), {a.node()},
                                     [](auto& self) {
    auto d = (1 - self.value.array().square()) * self.grad.array();
    detail::accumulate(*self.parents[0], RowMatrix<Scalar>(d.matrix()));
  });
}

template <typename Scalar>
Scalar sigmoid_scalar(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
BasicTensor<Scalar> sigmoid(const BasicTensor<Scalar>& a) {
  RowMatrix<Scalar> out =
      a.value().unaryExpr([](Scalar x) { return sigmoid_scalar(x); });
  return detail::make_result<Scalar>(std::move(out), {a.node()},
                                     [](auto& self) {
    auto s = self.value.array();
    auto d = s * (1 - s) * self.grad.array();
    detail::accumulate(*self.parents[0], RowMatrix<Scalar>(d.matrix()));
  });
}

template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& a) {
  RowMatrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return detail::make_result<Scalar>(std::move(out), {a.node()},
                                     [](auto& self) {
    const auto& x = self.parents[0]->value;
    RowMatrix<Scalar> d =
        (x.array() > Scalar(0)).select(self.grad, Scalar(0));
    detail::accumulate(*self.parents[0], d);
  });
}

// Stacks blocks side by side: [r×a] ‖ [r×b] → [r×(a+b)].
template <typename Scalar>
BasicTensor<Scalar> concat_cols(std::span<const BasicTensor<Scalar>> parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  Index r = parts[0].rows();
  Index c = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == r, "concat_cols: row mismatch " +
                                       parts[0].shape_string() + " vs " +
                                       p.shape_string());
    c += p.cols();
  }
  RowMatrix<Scalar> out(r, c);
  std::vector<std::shared_ptr<hiercode::detail::Node<Scalar>>> parents;
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
    parents.push_back(p.node());
  }
  return detail::make_result<Scalar>(
      std::move(out), std::move(parents), [offsets](auto& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = *self.parents[i];
          if (p.requires_grad) {
            detail::accumulate(
                p, RowMatrix<Scalar>(self.grad.middleCols(offsets[i], p.value.cols())));
          }
        }
      });
}

template <typename Scalar>
BasicTensor<Scalar> concat_cols(std::initializer_list<BasicTensor<Scalar>> parts) {
  std::vector<BasicTensor<Scalar>> v(parts);
  return concat_cols(std::span<const BasicTensor<Scalar>>(v));
}

template <typename Scalar>
BasicTensor<Scalar> concat_rows(std::span<const BasicTensor<Scalar>> parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  Index c = parts[0].cols();
  Index r = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == c, "concat_rows: column mismatch " +
                                       parts[0].shape_string() + " vs " +
                                       p.shape_string());
    r += p.rows();
  }
  RowMatrix<Scalar> out(r, c);
  std::vector<std::shared_ptr<hiercode::detail::Node<Scalar>>> parents;
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
    parents.push_back(p.node());
  }
  return detail::make_result<Scalar>(
      std::move(out), std::move(parents), [offsets](auto& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = *self.parents[i];
          if (p.requires_grad) {
            detail::accumulate(
                p, RowMatrix<Scalar>(self.grad.middleRows(offsets[i], p.value.rows())));
          }
        }
      });
}

template <typename Scalar>
BasicTensor<Scalar> concat_rows(std::initializer_list<BasicTensor<Scalar>> parts) {
  std::vector<BasicTensor<Scalar>> v(parts);
  return concat_rows(std::span<const BasicTensor<Scalar>>(v));
}

// Column means: [r×c] → [1×c].
template <typename Scalar>
BasicTensor<Scalar> mean_rows(const BasicTensor<Scalar>& a) {
  detail::require(a.rows() > 0, "mean_rows: empty input");
  RowMatrix<Scalar> out = a.value().colwise().mean();
  return detail::make_result<Scalar>(std::move(out), {a.node()},
                                     [](auto& self) {
    auto& p = *self.parents[0];
    Index r = p.value.rows();
    RowMatrix<Scalar> g = self.grad.replicate(r, 1) / Scalar(r);
    detail::accumulate(p, g);
  });
}

template <typename Scalar>
BasicTensor<Scalar> sum(const BasicTensor<Scalar>& a) {
  RowMatrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::make_result<Scalar>(std::move(out), {a.node()},
                                     [](auto& self) {
    auto& p = *self.parents[0];
    detail::accumulate(
        p, RowMatrix<Scalar>(RowMatrix<Scalar>::Constant(
               p.value.rows(), p.value.cols(), self.grad(0, 0))));
  });
}

// [1×c] → [r×c] by repeating the row.
template <typename Scalar>
BasicTensor<Scalar> broadcast_rows(const BasicTensor<Scalar>& row, Index r) {
  detail::require(row.rows() == 1, "broadcast_rows: expected one row, got " +
                                       row.shape_string());
  return detail::make_result<Scalar>(
      row.value().replicate(r, 1), {row.node()}, [](auto& self) {
        detail::accumulate(*self.parents[0],
                           RowMatrix<Scalar>(self.grad.colwise().sum()));
      });
}

// Row-wise softmax. `valid` (length = cols, optional) marks columns that
// take part; invalid columns get an additive -inf and hence exactly zero mass.
template <typename Scalar>
BasicTensor<Scalar> softmax_rows(const BasicTensor<Scalar>& a,
                                 const std::vector<bool>& valid = {}) {
  const Index c = a.cols();
  detail::require(valid.empty() || static_cast<Index>(valid.size()) == c,
                  "softmax_rows: mask length " + std::to_string(valid.size()) +
                      " for " + a.shape_string());
  RowMatrix<Scalar> out(a.rows(), c);
  for (Index i = 0; i < a.rows(); ++i) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < c; ++j) {
      if (valid.empty() || valid[j]) mx = std::max(mx, a.value()(i, j));
    }
    if (!std::isfinite(mx)) {
      throw ContractError("softmax_rows: row has no valid position");
    }
    Scalar z = 0;
    for (Index j = 0; j < c; ++j) {
      Scalar e = (valid.empty() || valid[j]) ? std::exp(a.value()(i, j) - mx)
                                             : Scalar(0);
      out(i, j) = e;
      z += e;
    }
    out.row(i) /= z;
  }
  return detail::make_result<Scalar>(std::move(out), {a.node()},
                                     [](auto& self) {
    // dx = s ⊙ (g − rowsum(g ⊙ s))
    const auto& s = self.value;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot =
        (self.grad.cwiseProduct(s)).rowwise().sum();
    RowMatrix<Scalar> d =
        s.cwiseProduct(RowMatrix<Scalar>(self.grad.colwise() - dot));
    detail::accumulate(*self.parents[0], d);
  });
}

namespace detail {

// Window matrix: row j holds rows j-h .. j+h of x flattened, zero-padded.
template <typename Scalar>
RowMatrix<Scalar> im2col(const RowMatrix<Scalar>& x, Index width) {
  const Index n = x.rows(), d = x.cols(), h = width / 2;
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(n, width * d);
  for (Index j = 0; j < n; ++j) {
    for (Index r = 0; r < width; ++r) {
      Index src = j - h + r;
      if (src >= 0 && src < n) cols.block(j, r * d, 1, d) = x.row(src);
    }
  }
  return cols;
}

template <typename Scalar>
RowMatrix<Scalar> col2im(const RowMatrix<Scalar>& cols, Index n, Index d,
                         Index width) {
  const Index h = width / 2;
  RowMatrix<Scalar> x = RowMatrix<Scalar>::Zero(n, d);
  for (Index j = 0; j < n; ++j) {
    for (Index r = 0; r < width; ++r) {
      Index src = j - h + r;
      if (src >= 0 && src < n) x.row(src) += cols.block(j, r * d, 1, d);
    }
  }
  return x;
}

}  // namespace detail

// Same-length 1-D convolution along rows, stride 1, floor(width/2) zero rows
// of padding at each end. w is [(width·d_in)×d_out] over flattened windows.
template <typename Scalar>
BasicTensor<Scalar> conv1d_same(const BasicTensor<Scalar>& x,
                                const BasicTensor<Scalar>& w, Index width) {
  if (width < 1 || width % 2 == 0) {
    throw std::invalid_argument("conv1d_same: kernel width must be odd, got " +
                                std::to_string(width));
  }
  detail::require(w.rows() == width * x.cols(),
                  "conv1d_same: weight " + w.shape_string() +
                      " does not fit width " + std::to_string(width) +
                      " over input " + x.shape_string());
  RowMatrix<Scalar> cols = detail::im2col(x.value(), width);
  RowMatrix<Scalar> out = cols * w.value();
  return detail::make_result<Scalar>(
      std::move(out), {x.node(), w.node()},
      [width, cols = std::move(cols)](auto& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        if (pw.requires_grad) detail::accumulate(pw, RowMatrix<Scalar>(cols.transpose() * self.grad));
        if (px.requires_grad) {
          RowMatrix<Scalar> gcols = self.grad * pw.value.transpose();
          detail::accumulate(px, detail::col2im<Scalar>(gcols, px.value.rows(), px.value.cols(), width));
        }
      });
}

// Embedding lookup: row j of the result is row idx[j] of table.
template <typename Scalar>
BasicTensor<Scalar> gather_rows(const BasicTensor<Scalar>& table,
                                std::vector<Index> idx) {
  RowMatrix<Scalar> out(static_cast<Index>(idx.size()), table.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] < 0 || idx[j] >= table.rows()) {
      throw ContractError("gather_rows: index " + std::to_string(idx[j]) +
                          " out of range for " + table.shape_string());
    }
    out.row(static_cast<Index>(j)) = table.value().row(idx[j]);
  }
  return detail::make_result<Scalar>(
      std::move(out), {table.node()}, [idx = std::move(idx)](auto& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t j = 0; j < idx.size(); ++j) {
          p.grad.row(idx[j]) += self.grad.row(static_cast<Index>(j));
        }
      });
}

// Row i of the result is the mean of the table rows listed in groups[i].
template <typename Scalar>
BasicTensor<Scalar> segment_mean_rows(const BasicTensor<Scalar>& table,
                                      std::vector<std::vector<Index>> groups) {
  RowMatrix<Scalar> out =
      RowMatrix<Scalar>::Zero(static_cast<Index>(groups.size()), table.cols());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].empty()) {
      throw ContractError("segment_mean_rows: empty group " + std::to_string(i));
    }
    for (Index k : groups[i]) {
      if (k < 0 || k >= table.rows()) {
        throw ContractError("segment_mean_rows: index " + std::to_string(k) +
                            " out of range for " + table.shape_string());
      }
      out.row(static_cast<Index>(i)) += table.value().row(k);
    }
    out.row(static_cast<Index>(i)) /= Scalar(groups[i].size());
  }
  return detail::make_result<Scalar>(
      std::move(out), {table.node()}, [groups = std::move(groups)](auto& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < groups.size(); ++i) {
          Scalar inv = Scalar(1) / Scalar(groups[i].size());
          for (Index k : groups[i]) {
            p.grad.row(k) += inv * self.grad.row(static_cast<Index>(i));
          }
        }
      });
}

// Zeroes the rows whose flag is false.
template <typename Scalar>
BasicTensor<Scalar> mask_rows(const BasicTensor<Scalar>& a,
                              std::vector<bool> flags) {
  detail::require(static_cast<Index>(flags.size()) == a.rows(),
                  "mask_rows: mask length " + std::to_string(flags.size()) +
                      " for " + a.shape_string());
  RowMatrix<Scalar> out = a.value();
  for (Index i = 0; i < a.rows(); ++i) {
    if (!flags[i]) out.row(i).setZero();
  }
  return detail::make_result<Scalar>(
      std::move(out), {a.node()}, [flags = std::move(flags)](auto& self) {
        RowMatrix<Scalar> g = self.grad;
        for (Index i = 0; i < g.rows(); ++i) {
          if (!flags[i]) g.row(i).setZero();
        }
        detail::accumulate(*self.parents[0], g);
      });
}

// Inverted dropout: scales survivors by 1/(1−p) when training, identity
// otherwise.
template <typename Scalar, typename Rng>
BasicTensor<Scalar> dropout(const BasicTensor<Scalar>& a, double p,
                            bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: probability must be in [0,1)");
  }
  if (!training || p == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  RowMatrix<Scalar> m(a.rows(), a.cols());
  const Scalar s = Scalar(1) / Scalar(1.0 - p);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? s : Scalar(0);
  return mul(a, BasicTensor<Scalar>::constant(std::move(m)));
}

// Σ −y·log(p) − (1−y)·log(1−p) with both logs clamped below at `floor`.
template <typename Scalar>
BasicTensor<Scalar> bce_sum(const BasicTensor<Scalar>& prob,
                            const RowMatrix<Scalar>& target,
                            Scalar floor = Scalar(1e-12)) {
  detail::require(prob.rows() == target.rows() && prob.cols() == target.cols(),
                  "bce_sum: shape mismatch " + prob.shape_string() + " vs " +
                      hiercode::detail::shape_str(target.rows(), target.cols()));
  Scalar total = 0;
  for (Index i = 0; i < prob.size(); ++i) {
    Scalar p = prob.value().data()[i];
    Scalar y = target.data()[i];
    total -= y * std::log(std::max(p, floor)) +
             (1 - y) * std::log(std::max(Scalar(1) - p, floor));
  }
  RowMatrix<Scalar> out(1, 1);
  out(0, 0) = total;
  return detail::make_result<Scalar>(
      std::move(out), {prob.node()}, [target, floor](auto& self) {
        auto& pp = *self.parents[0];
        RowMatrix<Scalar> g(pp.value.rows(), pp.value.cols());
        for (Index i = 0; i < g.size(); ++i) {
          Scalar p = pp.value.data()[i];
          Scalar y = target.data()[i];
          Scalar d = 0;
          if (p > floor) d -= y / p;
          if (Scalar(1) - p > floor) d += (1 - y) / (Scalar(1) - p);
          g.data()[i] = d * self.grad(0, 0);
        }
        detail::accumulate(pp, g);
      });
}

}  // namespace ops

// Central-difference gradient check. `loss_fn` rebuilds the forward graph
// from the current parameter values; each sampled coordinate is perturbed by
// ±eps in place. Returns max |analytic − numeric| / max(1, |analytic|).
template <typename Scalar, typename Rng>
Scalar grad_check(const std::function<BasicTensor<Scalar>()>& loss_fn,
                  std::span<const BasicTensor<Scalar>> params, Scalar eps,
                  Rng& rng, std::size_t max_coords_per_param = 64) {
  if (!(eps >= Scalar(1e-7) && eps <= Scalar(1e-4))) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
  }
  for (const auto& p : params) p.zero_grad();
  backward(loss_fn());
  std::vector<RowMatrix<Scalar>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  Scalar worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].mutable_value();
    std::vector<Index> coords(static_cast<std::size_t>(value.size()));
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<Index>(i);
    if (coords.size() > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords_per_param);
    }
    for (Index c : coords) {
      const Scalar saved = value.data()[c];
      value.data()[c] = saved + eps;
      const Scalar up = loss_fn().item();
      value.data()[c] = saved - eps;
      const Scalar down = loss_fn().item();
      value.data()[c] = saved;
      const Scalar numeric = (up - down) / (2 * eps);
      const Scalar a = analytic[k].data()[c];
      worst = std::max(worst, std::abs(a - numeric) / std::max(Scalar(1), std::abs(a)));
    }
  }
  return worst;
}

}  // namespace hiercode
