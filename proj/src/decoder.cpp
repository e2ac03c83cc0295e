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

#include "blab/decoder.hpp"

#include <cmath>

namespace blab {

namespace {

template <class P>
DecoderVars bind_decoder_impl(Graph& g, P& p, bool trainable) {
  DecoderVars v;
  v.tok_emb = bind_param(g, p.tok_emb, trainable);
  v.pos_emb = bind_param(g, p.pos_emb, trainable);
  for (auto& layer : p.layers) {
    v.layers.push_back({bind_attention(g, layer.self_attn, trainable), bind_layer_norm(g, layer.ln1, trainable),
                        bind_gated_cross(g, layer.cross, trainable), bind_layer_norm(g, layer.ln2, trainable),
                        bind_feed_forward(g, layer.ffn, trainable), bind_layer_norm(g, layer.ln3, trainable)});
  }
  return v;
}

}  // namespace

GatedCrossParams GatedCrossParams::init(std::size_t d, Rng& rng) {
  GatedCrossParams p;
  p.g = normal_param({d, d}, rng);
  p.g_prime = normal_param({d, d}, rng);
  p.wv = normal_param({d, d}, rng);
  return p;
}

void GatedCrossParams::shapes(const std::string& prefix, std::size_t d, ShapeList& out) {
  out.push_back({prefix + "g", {d, d}});
  out.push_back({prefix + "g_prime", {d, d}});
  out.push_back({prefix + "wv", {d, d}});
}

DecoderParams DecoderParams::init(const ModelConfig& cfg, const Tensor& encoder_tok_emb, Rng& rng) {
  cfg.validate();
  const auto& e = cfg.encoder;
  if (encoder_tok_emb.shape() != Shape{e.vocab_size, e.d_model}) {
    throw ConfigError("decoder init: encoder embedding has shape " + shape_string(encoder_tok_emb.shape()));
  }
  DecoderParams p;
  p.tok_emb = Param(encoder_tok_emb);
  p.pos_emb = normal_param({e.max_len, e.d_model}, rng);
  for (std::size_t i = 0; i < cfg.decoder_layers; ++i) {
    DecoderLayerParams layer;
    layer.self_attn = AttentionParams::init(e.d_model, rng);
    layer.ln1 = LayerNormParams::init(e.d_model);
    layer.cross = GatedCrossParams::init(e.d_model, rng);
    layer.ln2 = LayerNormParams::init(e.d_model);
    layer.ffn = FeedForwardParams::init(e.d_model, e.ffn_width(), rng);
    layer.ln3 = LayerNormParams::init(e.d_model);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ShapeList DecoderParams::shapes(const ModelConfig& cfg, const std::string& prefix) {
  const auto& e = cfg.encoder;
  ShapeList out;
  out.push_back({prefix + "tok_emb", {e.vocab_size, e.d_model}});
  out.push_back({prefix + "pos_emb", {e.max_len, e.d_model}});
  for (std::size_t i = 0; i < cfg.decoder_layers; ++i) {
    const std::string lp = prefix + "layers." + std::to_string(i) + ".";
    AttentionParams::shapes(lp + "self_attn.", e.d_model, out);
    LayerNormParams::shapes(lp + "ln1.", e.d_model, out);
    GatedCrossParams::shapes(lp + "cross.", e.d_model, out);
    LayerNormParams::shapes(lp + "ln2.", e.d_model, out);
    FeedForwardParams::shapes(lp + "ffn.", e.d_model, e.ffn_width(), out);
    LayerNormParams::shapes(lp + "ln3.", e.d_model, out);
  }
  return out;
}

DecoderVars bind_decoder(Graph& g, DecoderParams& p, bool trainable) { return bind_decoder_impl(g, p, trainable); }

DecoderVars bind_decoder(Graph& g, const DecoderParams& p) { return bind_decoder_impl(g, p, false); }

Var gated_cross_attention(Var queries, Var z, const GatedCrossVars& p) {
  if (z.rows() != 1) throw NumericError("gated_cross_attention: expected a single sentence vector");
  const std::vector<int> owner(queries.rows(), 0);
  return gated_cross_attention(queries, z, owner, p);
}

Var gated_cross_attention(Var queries, Var z, std::span<const int> owner, const GatedCrossVars& p) {
  if (owner.size() != queries.rows()) {
    throw NumericError("gated_cross_attention: " + std::to_string(owner.size()) + " owners for " +
                       std::to_string(queries.rows()) + " queries");
  }
  if (queries.cols() != z.cols()) {
    throw NumericError("gated_cross_attention: query width " + std::to_string(queries.cols()) +
                       " differs from z width " + std::to_string(z.cols()));
  }
  const Var context_gate = gather_rows(matmul(z, p.g_prime), owner);
  const Var gates = sigmoid(add(matmul(queries, p.g), context_gate));
  const Var projected = gather_rows(matmul(z, p.wv), owner);
  return mul(gates, projected);
}

Var ungated_single_key_attention(Var queries, Var z, Var wk, Var wv) {
  if (z.rows() != 1) throw NumericError("ungated_single_key_attention: expected a single sentence vector");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  const Var key = matmul(z, wk);                                              // [1 x d]
  const Var scores = scale(matmul(queries, transpose(key)), inv_sqrt);       // [T x 1]
  const Var weights = softmax(scores, 1);                                     // all ones
  return matmul(weights, matmul(z, wv));                                      // [T x d]
}

Var decoder_forward(const DecoderVars& vars, const ModelConfig& cfg, Var z, const Batch& inputs, bool train_mode,
                    Rng* rng, DecoderTrace* trace) {
  const auto& e = cfg.encoder;
  if (inputs.seq_len > e.max_len) {
    throw NumericError("decoder_forward: sequence length " + std::to_string(inputs.seq_len) +
                       " exceeds max_len " + std::to_string(e.max_len));
  }
  if (z.rows() != inputs.rows) {
    throw NumericError("decoder_forward: " + std::to_string(z.rows()) + " sentence vectors for " +
                       std::to_string(inputs.rows) + " sequences");
  }
  std::vector<int> positions(inputs.ids.size());
  std::vector<int> owner(inputs.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i] = static_cast<int>(i % inputs.seq_len);
    owner[i] = static_cast<int>(i / inputs.seq_len);
  }

  Var x = add(gather_rows(vars.tok_emb, inputs.ids), gather_rows(vars.pos_emb, positions));
  x = maybe_dropout(x, e.dropout, train_mode, rng);
  bool first = true;
  for (const auto& layer : vars.layers) {
    Var attended = self_attention(layer.self_attn, x, inputs.seq_len, e.n_heads, inputs.mask, true);
    attended = maybe_dropout(attended, e.dropout, train_mode, rng);
    x = apply_layer_norm(layer.ln1, add(x, attended));

    Var cross = gated_cross_attention(x, z, owner, layer.cross);
    if (trace != nullptr && first) {
      trace->cross_queries = x;
      trace->cross_out = cross;
      trace->gates = sigmoid(add(matmul(x, layer.cross.g), gather_rows(matmul(z, layer.cross.g_prime), owner)));
    }
    cross = maybe_dropout(cross, e.dropout, train_mode, rng);
    x = apply_layer_norm(layer.ln2, add(x, cross));

    Var ff = maybe_dropout(feed_forward(layer.ffn, x), e.dropout, train_mode, rng);
    x = apply_layer_norm(layer.ln3, add(x, ff));
    first = false;
  }
  return matmul(x, transpose(vars.tok_emb));
}

std::vector<int> decoder_input(std::span<const int> content) {
  std::vector<int> ids{kBos};
  ids.insert(ids.end(), content.begin(), content.end());
  return ids;
}

std::vector<int> decoder_target(std::span<const int> content) {
  std::vector<int> ids(content.begin(), content.end());
  ids.push_back(kEos);
  return ids;
}

Var reconstruction_loss(const DecoderVars& vars, const ModelConfig& cfg, Var z,
                        std::span<const std::vector<int>> contents, bool train_mode, Rng* rng) {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;
  for (const auto& c : contents) {
    inputs.push_back(decoder_input(c));
    targets.push_back(decoder_target(c));
  }
  const Batch in = make_batch(inputs);
  const Batch out = make_batch(targets);
  const Var logits = decoder_forward(vars, cfg, z, in, train_mode, rng);
  return nll_loss(logits, out.ids, kPad);
}

}  // namespace blab
