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
#include <span>
#include <string>
#include <vector>

#include "blab/graph.hpp"

// Transformer sublayers shared by the encoder and the decoder. Activations
// are B sequences of seq_len rows stacked into one [B*seq_len x d] matrix.
namespace blab {

struct NamedShape {
  std::string name;
  Shape shape;
};
using ShapeList = std::vector<NamedShape>;

std::size_t count_values(const ShapeList& shapes);

/// Weight matrices ~ Normal(0, 0.02).
Param normal_param(Shape shape, Rng& rng, double stddev = 0.02);

/// Binds a parameter as a trainable or frozen leaf; const parameters are
/// always constants.
inline Var bind_param(Graph& g, Param& p, bool trainable) { return g.param(p, trainable); }
inline Var bind_param(Graph& g, const Param& p, bool /*trainable*/) { return g.constant(p.value); }

struct AttentionParams {
  Param wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionParams init(std::size_t d_model, Rng& rng);
  static void shapes(const std::string& prefix, std::size_t d_model, ShapeList& out);

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "wq", self.wq);
    f(prefix + "bq", self.bq);
    f(prefix + "wk", self.wk);
    f(prefix + "bk", self.bk);
    f(prefix + "wv", self.wv);
    f(prefix + "bv", self.bv);
    f(prefix + "wo", self.wo);
    f(prefix + "bo", self.bo);
  }
};

struct FeedForwardParams {
  Param w1, b1, w2, b2;

  static FeedForwardParams init(std::size_t d_model, std::size_t width, Rng& rng);
  static void shapes(const std::string& prefix, std::size_t d_model, std::size_t width, ShapeList& out);

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "w1", self.w1);
    f(prefix + "b1", self.b1);
    f(prefix + "w2", self.w2);
    f(prefix + "b2", self.b2);
  }
};

struct LayerNormParams {
  Param gamma, beta;

  static LayerNormParams init(std::size_t d_model);
  static void shapes(const std::string& prefix, std::size_t d_model, ShapeList& out);

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "gamma", self.gamma);
    f(prefix + "beta", self.beta);
  }
};

struct AttentionVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};
struct FeedForwardVars {
  Var w1, b1, w2, b2;
};
struct LayerNormVars {
  Var gamma, beta;
};

template <class P>
AttentionVars bind_attention(Graph& g, P& p, bool trainable) {
  return {bind_param(g, p.wq, trainable), bind_param(g, p.bq, trainable),
          bind_param(g, p.wk, trainable), bind_param(g, p.bk, trainable),
          bind_param(g, p.wv, trainable), bind_param(g, p.bv, trainable),
          bind_param(g, p.wo, trainable), bind_param(g, p.bo, trainable)};
}

template <class P>
FeedForwardVars bind_feed_forward(Graph& g, P& p, bool trainable) {
  return {bind_param(g, p.w1, trainable), bind_param(g, p.b1, trainable),
          bind_param(g, p.w2, trainable), bind_param(g, p.b2, trainable)};
}

template <class P>
LayerNormVars bind_layer_norm(Graph& g, P& p, bool trainable) {
  return {bind_param(g, p.gamma, trainable), bind_param(g, p.beta, trainable)};
}

/// x @ w + b
Var linear(Var x, Var w, Var b);

/// Multi-head scaled dot-product self-attention over each stacked sequence.
/// mask has one entry per row of x (1 = real token); causal additionally
/// hides later positions.
Var self_attention(const AttentionVars& p, Var x, std::size_t seq_len, std::size_t n_heads,
                   std::span<const std::uint8_t> mask, bool causal);

/// gelu(x W1 + b1) W2 + b2
Var feed_forward(const FeedForwardVars& p, Var x);

Var apply_layer_norm(const LayerNormVars& p, Var x);

/// Dropout that is the identity outside training or without an rng.
Var maybe_dropout(Var x, double p, bool train_mode, Rng* rng);

}  // namespace blab
