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

#include "blab/layers.hpp"

#include <cmath>

namespace blab {

std::size_t count_values(const ShapeList& shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += shape_size(s.shape);
  return n;
}

Param normal_param(Shape shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = round_to(Precision::f32, rng.normal() * stddev);
  return Param(std::move(t));
}

AttentionParams AttentionParams::init(std::size_t d, Rng& rng) {
  AttentionParams p;
  p.wq = normal_param({d, d}, rng);
  p.bq = Param(Tensor({d}));
  p.wk = normal_param({d, d}, rng);
  p.bk = Param(Tensor({d}));
  p.wv = normal_param({d, d}, rng);
  p.bv = Param(Tensor({d}));
  p.wo = normal_param({d, d}, rng);
  p.bo = Param(Tensor({d}));
  return p;
}

void AttentionParams::shapes(const std::string& prefix, std::size_t d, ShapeList& out) {
  for (const char* proj : {"q", "k", "v", "o"}) {
    out.push_back({prefix + "w" + proj, {d, d}});
    out.push_back({prefix + "b" + proj, {d}});
  }
}

FeedForwardParams FeedForwardParams::init(std::size_t d, std::size_t width, Rng& rng) {
  FeedForwardParams p;
  p.w1 = normal_param({d, width}, rng);
  p.b1 = Param(Tensor({width}));
  p.w2 = normal_param({width, d}, rng);
  p.b2 = Param(Tensor({d}));
  return p;
}

void FeedForwardParams::shapes(const std::string& prefix, std::size_t d, std::size_t width, ShapeList& out) {
  out.push_back({prefix + "w1", {d, width}});
  out.push_back({prefix + "b1", {width}});
  out.push_back({prefix + "w2", {width, d}});
  out.push_back({prefix + "b2", {d}});
}

LayerNormParams LayerNormParams::init(std::size_t d) {
  LayerNormParams p;
  p.gamma = Param(Tensor({d}, 1.0));
  p.beta = Param(Tensor({d}));
  return p;
}

void LayerNormParams::shapes(const std::string& prefix, std::size_t d, ShapeList& out) {
  out.push_back({prefix + "gamma", {d}});
  out.push_back({prefix + "beta", {d}});
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var self_attention(const AttentionVars& p, Var x, std::size_t seq_len, std::size_t n_heads,
                   std::span<const std::uint8_t> mask, bool causal) {
  const std::size_t total = x.rows();
  const std::size_t d = x.cols();
  if (seq_len == 0 || total % seq_len != 0) {
    throw NumericError("self_attention: " + std::to_string(total) + " rows do not split into sequences of " +
                       std::to_string(seq_len));
  }
  if (mask.size() != total) throw NumericError("self_attention: mask length does not match rows");
  if (n_heads == 0 || d % n_heads != 0) throw NumericError("self_attention: heads must divide width");
  const std::size_t d_head = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

  const Var q = linear(x, p.wq, p.bq);
  const Var k = linear(x, p.wk, p.bk);
  const Var v = linear(x, p.wv, p.bv);

  std::vector<Var> sequences;
  for (std::size_t b = 0; b < total / seq_len; ++b) {
    const Var qb = slice_rows(q, b * seq_len, seq_len);
    const Var kb = slice_rows(k, b * seq_len, seq_len);
    const Var vb = slice_rows(v, b * seq_len, seq_len);
    const auto row_mask = mask.subspan(b * seq_len, seq_len);
    std::vector<Var> heads;
    for (std::size_t h = 0; h < n_heads; ++h) {
      const Var qh = slice_cols(qb, h * d_head, d_head);
      const Var kh = slice_cols(kb, h * d_head, d_head);
      const Var vh = slice_cols(vb, h * d_head, d_head);
      const Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
      const Var weights = masked_softmax(scores, row_mask, causal);
      heads.push_back(matmul(weights, vh));
    }
    sequences.push_back(n_heads == 1 ? heads[0] : concat_cols(heads));
  }
  const Var joined = sequences.size() == 1 ? sequences[0] : concat_rows(sequences);
  return linear(joined, p.wo, p.bo);
}

Var feed_forward(const FeedForwardVars& p, Var x) {
  return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

Var apply_layer_norm(const LayerNormVars& p, Var x) { return layer_norm(x, p.gamma, p.beta, 1e-5); }

Var maybe_dropout(Var x, double p, bool train_mode, Rng* rng) {
  if (!train_mode || rng == nullptr || p <= 0.0) return x;
  return dropout(x, p, *rng);
}

}  // namespace blab
