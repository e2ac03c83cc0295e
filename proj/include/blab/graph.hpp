/*
 * Copyright 2026 The bottleneck-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "blab/rng.hpp"
#include "blab/tensor.hpp"

namespace blab {

/// A trainable tensor owned by a model. grad accumulates across backward
/// passes until zero_grad().
struct Param {
  Tensor value;
  Tensor grad;

  Param() = default;
  explicit Param(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad = Tensor::zeros_like(value); }
};

class Graph;

/// Handle to a node on a Graph. Cheap to copy; only valid while the graph
/// lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
};

/// Append-only tape. Nodes are recorded in creation order, which is a
/// topological order, and backward() walks them once in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(Precision precision = Precision::f32) : precision_(precision) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Precision precision() const { return precision_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the graph (used by gradient checks).
  Var input(Tensor value);
  /// Leaf bound to a model parameter. Trainable leaves add their gradient
  /// into param.grad after backward; frozen ones behave as constants.
  Var param(Param& p, bool trainable);

  void backward(Var loss);

  const Tensor& value(Var v) const;
  /// Gradient of a node after backward(); zeros when nothing flowed into it.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Used by op implementations.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  /// Gradient buffer of an input, or nullptr when it does not need one.
  Tensor* grad_buffer(Var v);

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Param* sink = nullptr;
  };

  Var push(Node node);
  void check_owned(Var v, const char* op) const;

  Precision precision_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
  Tensor empty_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Matrices are row-major; rank-1 values act as a row.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a[m x n] + row[1 x n] broadcast over rows.
Var add_row(Var a, Var row);
Var abs(Var a);

enum class Activation { sigmoid, gelu };
Var activation(Var x, Activation kind);
inline Var sigmoid(Var x) { return activation(x, Activation::sigmoid); }
inline Var gelu(Var x) { return activation(x, Activation::gelu); }

/// Softmax along `axis` (0 or 1 for matrices, 0 for vectors).
Var softmax(Var x, int axis);
/// Row softmax where entry (i, j) takes part only if key_valid[j] and, when
/// causal, j <= i. Excluded entries are exactly zero.
Var masked_softmax(Var scores, std::span<const std::uint8_t> key_valid, bool causal);

Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// Rows of `table` selected by index; gradient scatters back.
Var gather_rows(Var table, std::span<const int> rows);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

Var sum(Var x);
Var mean(Var x);
/// Column-wise mean / max over all rows: [m x n] -> [1 x n].
Var mean_rows(Var x);
Var max_rows(Var x);

/// Mean over non-ignored rows of -log softmax(logits[t])[targets[t]].
Var nll_loss(Var logits, std::span<const int> targets, int ignore_id);

/// Inverted dropout; identity when p == 0.
Var dropout(Var x, double p, Rng& rng);

}  // namespace blab
