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

#include <span>
#include <string>
#include <vector>

#include "blab/config.hpp"
#include "blab/layers.hpp"
#include "blab/text.hpp"

namespace blab {

/// Gated cross-attention from a single sentence vector:
///   g_t = sigmoid(Q_t G + z G'),  o_t = g_t * (z W_V)
/// Row-vector convention, so G and G' are stored transposed relative to the
/// column-vector form. No biases, and no key projection (with one key the
/// attention weights are identically 1).
struct GatedCrossParams {
  Param g;        // [d x d]
  Param g_prime;  // [d x d]
  Param wv;       // [d x d]

  static GatedCrossParams init(std::size_t d_model, Rng& rng);
  static void shapes(const std::string& prefix, std::size_t d_model, ShapeList& out);

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "g", self.g);
    f(prefix + "g_prime", self.g_prime);
    f(prefix + "wv", self.wv);
  }
};

struct DecoderLayerParams {
  AttentionParams self_attn;
  LayerNormParams ln1;
  GatedCrossParams cross;
  LayerNormParams ln2;
  FeedForwardParams ffn;
  LayerNormParams ln3;

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    AttentionParams::each(self.self_attn, prefix + "self_attn.", f);
    LayerNormParams::each(self.ln1, prefix + "ln1.", f);
    GatedCrossParams::each(self.cross, prefix + "cross.", f);
    LayerNormParams::each(self.ln2, prefix + "ln2.", f);
    FeedForwardParams::each(self.ffn, prefix + "ffn.", f);
    LayerNormParams::each(self.ln3, prefix + "ln3.", f);
  }
};

/// Decoder with its own token embedding, tied to the output projection.
struct DecoderParams {
  Param tok_emb;  // [V x d]
  Param pos_emb;  // [max_len x d]
  std::vector<DecoderLayerParams> layers;

  /// token embedding is a copy of `encoder_tok_emb`; everything else fresh.
  static DecoderParams init(const ModelConfig& cfg, const Tensor& encoder_tok_emb, Rng& rng);
  static ShapeList shapes(const ModelConfig& cfg, const std::string& prefix = "decoder.");

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "tok_emb", self.tok_emb);
    f(prefix + "pos_emb", self.pos_emb);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      DecoderLayerParams::each(self.layers[i], prefix + "layers." + std::to_string(i) + ".", f);
    }
  }
};

struct GatedCrossVars {
  Var g, g_prime, wv;
};

struct DecoderLayerVars {
  AttentionVars self_attn;
  LayerNormVars ln1;
  GatedCrossVars cross;
  LayerNormVars ln2;
  FeedForwardVars ffn;
  LayerNormVars ln3;
};

struct DecoderVars {
  Var tok_emb, pos_emb;
  std::vector<DecoderLayerVars> layers;
};

template <class P>
GatedCrossVars bind_gated_cross(Graph& g, P& p, bool trainable) {
  return {bind_param(g, p.g, trainable), bind_param(g, p.g_prime, trainable), bind_param(g, p.wv, trainable)};
}

DecoderVars bind_decoder(Graph& g, DecoderParams& p, bool trainable);
DecoderVars bind_decoder(Graph& g, const DecoderParams& p);

/// Queries [T x d] against one sentence vector z [1 x d].
Var gated_cross_attention(Var queries, Var z, const GatedCrossVars& p);
/// Batched form: query row i reads z row owner[i].
Var gated_cross_attention(Var queries, Var z, std::span<const int> owner, const GatedCrossVars& p);

/// Standard attention with z as the only key/value. Kept as a reference: the
/// single-key softmax is exactly 1, so every output row equals z W_V.
Var ungated_single_key_attention(Var queries, Var z, Var wk, Var wv);

/// Intermediate values of the first decoder layer, for inspection in tests.
struct DecoderTrace {
  Var cross_queries;  // input to the gated cross-attention
  Var gates;
  Var cross_out;
};

/// Teacher-forced decoder. `inputs` holds <bos>-prefixed target sequences,
/// z is [inputs.rows x d]. Returns logits [inputs.rows*seq_len x V].
Var decoder_forward(const DecoderVars& vars, const ModelConfig& cfg, Var z, const Batch& inputs,
                    bool train_mode, Rng* rng, DecoderTrace* trace = nullptr);

/// Decoder input (<bos> + tokens) and target (tokens + <eos>) for one
/// sentence given its content ids.
std::vector<int> decoder_input(std::span<const int> content);
std::vector<int> decoder_target(std::span<const int> content);

/// Mean NLL of every target position (padding ignored) given z [rows x d]
/// and the clean content ids of each row.
Var reconstruction_loss(const DecoderVars& vars, const ModelConfig& cfg, Var z,
                        std::span<const std::vector<int>> contents, bool train_mode, Rng* rng);

}  // namespace blab
