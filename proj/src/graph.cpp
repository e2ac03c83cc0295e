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

#include "blab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "blab/kernels.hpp"

namespace blab {

const Tensor& Var::value() const { return graph->value(*this); }
const Tensor& Var::grad() const { return graph->grad(*this); }
bool Var::requires_grad() const { return graph->requires_grad(*this); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::check_owned(Var v, const char* op) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw NumericError(std::string(op) + ": variable does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  for (auto& x : n.value.values()) x = round_to(precision_, x);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  if (!value.all_finite()) throw NumericError("input: non-finite value");
  Node n;
  n.op = "input";
  n.value = std::move(value);
  for (auto& x : n.value.values()) x = round_to(precision_, x);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::param(Param& p, bool trainable) {
  if (!p.value.all_finite()) throw NumericError("param: non-finite parameter value");
  Node n;
  n.op = "param";
  n.value = p.value;
  if (precision_ == Precision::f32) {
    for (auto& x : n.value.values()) x = round_to(precision_, x);
  }
  n.requires_grad = trainable;
  if (trainable) n.sink = &p;
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const {
  check_owned(v, "value");
  return nodes_[v.id].value;
}

const Tensor& Graph::grad(Var v) const {
  check_owned(v, "grad");
  const Node& n = nodes_[v.id];
  return n.grad.empty() ? empty_ : n.grad;
}

bool Graph::requires_grad(Var v) const {
  check_owned(v, "requires_grad");
  return nodes_[v.id].requires_grad;
}

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Graph::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.op = op;
  for (auto& x : value.values()) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + op);
    x = round_to(precision_, x);
  }
  n.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in, op);
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  // Nodes that cannot reach a trainable leaf never run backward.
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor* Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return &n.grad;
}

void Graph::backward(Var loss) {
  check_owned(loss, "backward");
  if (nodes_[loss.id].value.size() != 1) {
    throw NumericError("backward: loss must be a scalar, got shape " +
                       shape_string(nodes_[loss.id].value.shape()));
  }
  if (backward_done_) throw NumericError("backward: graph was already differentiated");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;

  nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape(), 1.0);
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, n.grad);
      for (auto in : n.inputs) {
        const Tensor& g = nodes_[in].grad;
        if (!g.empty() && !g.all_finite()) {
          throw NumericError(std::string("non-finite gradient in backward of ") + n.op);
        }
      }
    }
    if (n.sink != nullptr) {
      Param& p = *n.sink;
      if (p.grad.shape() != p.value.shape()) p.grad = Tensor::zeros_like(p.value);
      auto dst = p.grad.values();
      auto src = n.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = round_to(precision_, dst[i] + src[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

Graph& graph_of(Var a, Var b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw NumericError(std::string(op) + ": operands belong to different graphs");
  }
  return *a.graph;
}

Graph& graph_of(Var a, const char* op) {
  if (a.graph == nullptr) throw NumericError(std::string(op) + ": unbound variable");
  return *a.graph;
}

void require_same_extent(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw NumericError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw NumericError("matmul: inner extents disagree, " + shape_string(av.shape()) + " x " +
                       shape_string(bv.shape()));
  }
  Tensor out(matrix_shape(m, n));
  kernels::gemm_nn(av.values(), bv.values(), out.values(), m, k, n);
  return g.record("matmul", std::move(out), {a, b}, [a, b, m, k, n](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      kernels::gemm_nt(go.values(), gr.value(b).values(), ga->values(), m, k, n);
    }
    if (Tensor* gb = gr.grad_buffer(b)) {
      kernels::gemm_tn(gr.value(a).values(), go.values(), gb->values(), m, k, n);
    }
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a, "transpose");
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(matrix_shape(n, m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return g.record("transpose", std::move(out), {a}, [a, m, n](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += go[j * m + i];
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b, "add");
  require_same_extent(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.record("add", std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go) {
    for (Var v : {a, b}) {
      if (Tensor* gv = gr.grad_buffer(v)) {
        for (std::size_t i = 0; i < go.size(); ++i) (*gv)[i] += go[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b, "sub");
  require_same_extent(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.record("sub", std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i];
    }
    if (Tensor* gb = gr.grad_buffer(b)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] -= go[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b, "mul");
  require_same_extent(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record("mul", std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      const Tensor& bv = gr.value(b);
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * bv[i];
    }
    if (Tensor* gb = gr.grad_buffer(b)) {
      const Tensor& av = gr.value(a);
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Graph& g = graph_of(a, "scale");
  Tensor out = map_values(a.value(), [s](double x) { return x * s; });
  return g.record("scale", std::move(out), {a}, [a, s](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * s;
    }
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a, row, "add_row");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (rv.size() != n) {
    throw NumericError("add_row: row " + shape_string(rv.shape()) + " does not broadcast over " +
                       shape_string(av.shape()));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  return g.record("add_row", std::move(out), {a, row}, [a, row, m, n](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i];
    }
    if (Tensor* gr_row = gr.grad_buffer(row)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gr_row)[j] += go[i * n + j];
    }
  });
}

Var abs(Var a) {
  Graph& g = graph_of(a, "abs");
  Tensor out = map_values(a.value(), [](double x) { return std::fabs(x); });
  return g.record("abs", std::move(out), {a}, [a](Graph& gr, const Tensor& go) {
    if (Tensor* ga = gr.grad_buffer(a)) {
      const Tensor& av = gr.value(a);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const double sign = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
        (*ga)[i] += go[i] * sign;
      }
    }
  });
}

namespace {

double sigmoid_value(double x, Precision p) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  // Keep the open interval after rounding to the storage precision.
  const double lo = p == Precision::f32 ? static_cast<double>(std::numeric_limits<float>::denorm_min())
                                        : std::numeric_limits<double>::denorm_min();
  const double hi = p == Precision::f32 ? static_cast<double>(std::nextafter(1.0f, 0.0f))
                                        : std::nextafter(1.0, 0.0);
  return std::clamp(y, lo, hi);
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Var activation(Var x, Activation kind) {
  Graph& g = graph_of(x, "activation");
  if (kind == Activation::sigmoid) {
    const Precision p = g.precision();
    Tensor out = map_values(x.value(), [p](double v) { return sigmoid_value(v, p); });
    const Var self{&g, static_cast<std::uint32_t>(g.size())};
    return g.record("sigmoid", std::move(out), {x}, [x, self](Graph& gr, const Tensor& go) {
      if (Tensor* gx = gr.grad_buffer(x)) {
        const Tensor& y = gr.value(self);
        for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i] * y[i] * (1.0 - y[i]);
      }
    });
  }
  Tensor out = map_values(x.value(), gelu_value);
  return g.record("gelu", std::move(out), {x}, [x](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      const Tensor& xv = gr.value(x);
      for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i] * gelu_derivative(xv[i]);
    }
  });
}

Var softmax(Var x, int axis) {
  Graph& g = graph_of(x, "softmax");
  const Tensor& xv = x.value();
  const int max_axis = xv.rank() <= 1 ? 0 : 1;
  if (axis < 0 || axis > max_axis) {
    throw NumericError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                       shape_string(xv.shape()));
  }
  // Lay the reduction out as `groups` lines of `len` elements spaced by `stride`.
  std::size_t groups, len, stride, group_step;
  if (xv.rank() <= 1 || axis == 1) {
    groups = xv.rows();
    len = xv.cols();
    stride = 1;
    group_step = len;
  } else {
    groups = xv.cols();
    len = xv.rows();
    stride = xv.cols();
    group_step = 1;
  }
  Tensor out = Tensor::zeros_like(xv);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t base = gi * group_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, xv[base + t * stride]);
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double e = std::exp(xv[base + t * stride] - mx);
      out[base + t * stride] = e;
      total += e;
    }
    for (std::size_t t = 0; t < len; ++t) out[base + t * stride] /= total;
  }
  const Var self{&g, static_cast<std::uint32_t>(g.size())};
  return g.record("softmax", std::move(out), {x},
                  [x, self, groups, len, stride, group_step](Graph& gr, const Tensor& go) {
                    Tensor* gx = gr.grad_buffer(x);
                    if (gx == nullptr) return;
                    const Tensor& y = gr.value(self);
                    for (std::size_t gi = 0; gi < groups; ++gi) {
                      const std::size_t base = gi * group_step;
                      double dot = 0.0;
                      for (std::size_t t = 0; t < len; ++t) {
                        dot += go[base + t * stride] * y[base + t * stride];
                      }
                      for (std::size_t t = 0; t < len; ++t) {
                        const std::size_t i = base + t * stride;
                        (*gx)[i] += y[i] * (go[i] - dot);
                      }
                    }
                  });
}

Var masked_softmax(Var scores, std::span<const std::uint8_t> key_valid, bool causal) {
  Graph& g = graph_of(scores, "masked_softmax");
  const Tensor& sv = scores.value();
  const std::size_t m = sv.rows(), n = sv.cols();
  if (key_valid.size() != n) {
    throw NumericError("masked_softmax: mask of length " + std::to_string(key_valid.size()) +
                       " for " + std::to_string(n) + " keys");
  }
  std::vector<std::uint8_t> visible(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      const bool on = key_valid[j] != 0 && (!causal || j <= i);
      visible[i * n + j] = on ? 1 : 0;
      any = any || on;
    }
    if (!any) throw NumericError("masked_softmax: query row " + std::to_string(i) + " sees no keys");
  }
  Tensor out(sv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (visible[i * n + j]) mx = std::max(mx, sv[i * n + j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!visible[i * n + j]) continue;
      const double e = std::exp(sv[i * n + j] - mx);
      out[i * n + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  const Var self{&g, static_cast<std::uint32_t>(g.size())};
  return g.record("masked_softmax", std::move(out), {scores},
                  [scores, self, m, n](Graph& gr, const Tensor& go) {
                    Tensor* gs = gr.grad_buffer(scores);
                    if (gs == nullptr) return;
                    const Tensor& y = gr.value(self);
                    for (std::size_t i = 0; i < m; ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < n; ++j) dot += go[i * n + j] * y[i * n + j];
                      for (std::size_t j = 0; j < n; ++j) {
                        (*gs)[i * n + j] += y[i * n + j] * (go[i * n + j] - dot);
                      }
                    }
                  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Graph& g = graph_of(x, gamma, "layer_norm");
  graph_of(x, beta, "layer_norm");
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw NumericError("layer_norm: affine of length " + std::to_string(gamma.value().size()) +
                       "/" + std::to_string(beta.value().size()) + " for rows of width " +
                       std::to_string(n));
  }
  if (!(eps > 0.0)) throw NumericError("layer_norm: eps must be positive");
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor out(xv.shape());
  std::vector<double> normalized(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (xv[i * n + j] - mu) * inv_std[i];
      normalized[i * n + j] = xhat;
      out[i * n + j] = gv[j] * xhat + bv[j];
    }
  }
  return g.record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, m, n, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Graph& gr, const Tensor& go) {
        if (Tensor* gg = gr.grad_buffer(gamma)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*gg)[j] += go[i * n + j] * normalized[i * n + j];
        }
        if (Tensor* gb = gr.grad_buffer(beta)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*gb)[j] += go[i * n + j];
        }
        Tensor* gx = gr.grad_buffer(x);
        if (gx == nullptr) return;
        const Tensor& gv = gr.value(gamma);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = go[i * n + j] * gv[j];
            mean_d += d;
            mean_dx += d * normalized[i * n + j];
          }
          mean_d *= inv_n;
          mean_dx *= inv_n;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = go[i * n + j] * gv[j];
            (*gx)[i * n + j] += inv_std[i] * (d - mean_d - normalized[i * n + j] * mean_dx);
          }
        }
      });
}

Var gather_rows(Var table, std::span<const int> rows) {
  Graph& g = graph_of(table, "gather_rows");
  const Tensor& tv = table.value();
  const std::size_t v = tv.rows(), n = tv.cols();
  if (rows.empty()) throw NumericError("gather_rows: empty index list");
  Tensor out(matrix_shape(rows.size(), n));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= v) {
      throw NumericError("gather_rows: index " + std::to_string(rows[r]) + " outside table of " +
                         std::to_string(v) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(rows[r]) * n, n, out.data() + r * n);
  }
  return g.record("gather_rows", std::move(out), {table},
                  [table, n, idx = std::vector<int>(rows.begin(), rows.end())](Graph& gr,
                                                                               const Tensor& go) {
                    Tensor* gt = gr.grad_buffer(table);
                    if (gt == nullptr) return;
                    for (std::size_t r = 0; r < idx.size(); ++r) {
                      double* dst = gt->data() + static_cast<std::size_t>(idx[r]) * n;
                      for (std::size_t j = 0; j < n; ++j) dst[j] += go[r * n + j];
                    }
                  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Graph& g = graph_of(x, "slice_rows");
  const Tensor& xv = x.value();
  const std::size_t n = xv.cols();
  if (count == 0 || begin + count > xv.rows()) {
    throw NumericError("slice_rows: [" + std::to_string(begin) + ", " +
                       std::to_string(begin + count) + ") outside " + shape_string(xv.shape()));
  }
  Tensor out(matrix_shape(count, n));
  std::copy_n(xv.data() + begin * n, count * n, out.data());
  return g.record("slice_rows", std::move(out), {x}, [x, begin, n](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      double* dst = gx->data() + begin * n;
      for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i];
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Graph& g = graph_of(x, "slice_cols");
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (count == 0 || begin + count > n) {
    throw NumericError("slice_cols: [" + std::to_string(begin) + ", " +
                       std::to_string(begin + count) + ") outside " + shape_string(xv.shape()));
  }
  Tensor out(matrix_shape(m, count));
  for (std::size_t i = 0; i < m; ++i) std::copy_n(xv.data() + i * n + begin, count, out.data() + i * count);
  return g.record("slice_cols", std::move(out), {x},
                  [x, begin, count, m, n](Graph& gr, const Tensor& go) {
                    if (Tensor* gx = gr.grad_buffer(x)) {
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < count; ++j) (*gx)[i * n + begin + j] += go[i * count + j];
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_rows: no inputs");
  Graph& g = graph_of(parts[0], "concat_rows");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    graph_of(parts[0], p, "concat_rows");
    if (p.cols() != n) {
      throw NumericError("concat_rows: width mismatch " + shape_string(parts[0].shape()) + " vs " +
                         shape_string(p.shape()));
    }
    total += p.rows();
  }
  Tensor out(matrix_shape(total, n));
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record("concat_rows", std::move(out), parts, [inputs](Graph& gr, const Tensor& go) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t len = gr.value(p).size();
      if (Tensor* gp = gr.grad_buffer(p)) {
        for (std::size_t i = 0; i < len; ++i) (*gp)[i] += go[offset + i];
      }
      offset += len;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  Graph& g = graph_of(parts[0], "concat_cols");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    graph_of(parts[0], p, "concat_cols");
    if (p.rows() != m) {
      throw NumericError("concat_cols: height mismatch " + shape_string(parts[0].shape()) + " vs " +
                         shape_string(p.shape()));
    }
    total += p.cols();
  }
  Tensor out(matrix_shape(m, total));
  std::size_t col = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t w = pv.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(pv.data() + i * w, w, out.data() + i * total + col);
    col += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record("concat_cols", std::move(out), parts, [inputs, m, total](Graph& gr, const Tensor& go) {
    std::size_t col = 0;
    for (const Var& p : inputs) {
      const std::size_t w = gr.value(p).cols();
      if (Tensor* gp = gr.grad_buffer(p)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) (*gp)[i * w + j] += go[i * total + col + j];
      }
      col += w;
    }
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x, "sum");
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return g.record("sum", Tensor::scalar(total), {x}, [x](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      for (auto& v : gx->values()) v += go[0];
    }
  });
}

Var mean(Var x) {
  Graph& g = graph_of(x, "mean");
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const double count = static_cast<double>(x.value().size());
  return g.record("mean", Tensor::scalar(total / count), {x}, [x, count](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      for (auto& v : gx->values()) v += go[0] / count;
    }
  });
}

Var mean_rows(Var x) {
  Graph& g = graph_of(x, "mean_rows");
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(matrix_shape(1, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += xv[i * n + j];
  for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
  return g.record("mean_rows", std::move(out), {x}, [x, m, n](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += go[j] / static_cast<double>(m);
    }
  });
}

Var max_rows(Var x) {
  Graph& g = graph_of(x, "max_rows");
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(matrix_shape(1, n));
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = xv[j];
    for (std::size_t i = 1; i < m; ++i) {
      if (xv[i * n + j] > best) {
        best = xv[i * n + j];
        arg[j] = i;
      }
    }
    out[j] = best;
  }
  return g.record("max_rows", std::move(out), {x}, [x, n, arg = std::move(arg)](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      for (std::size_t j = 0; j < n; ++j) (*gx)[arg[j] * n + j] += go[j];
    }
  });
}

Var nll_loss(Var logits, std::span<const int> targets, int ignore_id) {
  Graph& g = graph_of(logits, "nll_loss");
  const Tensor& lv = logits.value();
  const std::size_t t_len = lv.rows(), vocab = lv.cols();
  if (targets.size() != t_len) {
    throw NumericError("nll_loss: " + std::to_string(targets.size()) + " targets for " +
                       std::to_string(t_len) + " logit rows");
  }
  std::size_t counted = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (targets[t] == ignore_id) continue;
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= vocab) {
      throw NumericError("nll_loss: target id " + std::to_string(targets[t]) + " at position " +
                         std::to_string(t) + " outside vocabulary of " + std::to_string(vocab));
    }
    ++counted;
  }
  if (counted == 0) throw NumericError("nll_loss: every position is ignored");

  Tensor probs(lv.shape());
  double total = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (targets[t] == ignore_id) continue;
    const double* row = lv.data() + t * vocab;
    double mx = row[0];
    for (std::size_t v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      const double e = std::exp(row[v] - mx);
      probs[t * vocab + v] = e;
      z += e;
    }
    for (std::size_t v = 0; v < vocab; ++v) probs[t * vocab + v] /= z;
    total += -(row[targets[t]] - mx - std::log(z));
  }
  const double count = static_cast<double>(counted);
  return g.record("nll_loss", Tensor::scalar(total / count), {logits},
                  [logits, vocab, count, ignore_id, probs = std::move(probs),
                   tg = std::vector<int>(targets.begin(), targets.end())](Graph& gr, const Tensor& go) {
                    Tensor* gl = gr.grad_buffer(logits);
                    if (gl == nullptr) return;
                    const double s = go[0] / count;
                    for (std::size_t t = 0; t < tg.size(); ++t) {
                      if (tg[t] == ignore_id) continue;
                      for (std::size_t v = 0; v < vocab; ++v) {
                        (*gl)[t * vocab + v] += s * probs[t * vocab + v];
                      }
                      (*gl)[t * vocab + static_cast<std::size_t>(tg[t])] -= s;
                    }
                  });
}

Var dropout(Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw NumericError("dropout: probability must be below 1");
  Graph& g = graph_of(x, "dropout");
  const Tensor& xv = x.value();
  std::vector<double> keep(xv.size());
  const double scale_kept = 1.0 / (1.0 - p);
  Tensor out = Tensor::zeros_like(xv);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    keep[i] = rng.uniform() >= p ? scale_kept : 0.0;
    out[i] = xv[i] * keep[i];
  }
  return g.record("dropout", std::move(out), {x}, [x, keep = std::move(keep)](Graph& gr, const Tensor& go) {
    if (Tensor* gx = gr.grad_buffer(x)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i] * keep[i];
    }
  });
}

}  // namespace blab
