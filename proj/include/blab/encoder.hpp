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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "blab/config.hpp"
#include "blab/layers.hpp"
#include "blab/text.hpp"

namespace blab {

struct EncoderLayerParams {
  AttentionParams attn;
  LayerNormParams ln1;
  FeedForwardParams ffn;
  LayerNormParams ln2;

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    AttentionParams::each(self.attn, prefix + "attn.", f);
    LayerNormParams::each(self.ln1, prefix + "ln1.", f);
    FeedForwardParams::each(self.ffn, prefix + "ffn.", f);
    LayerNormParams::each(self.ln2, prefix + "ln2.", f);
  }
};

/// Post-norm transformer encoder with learned positions. The MLM output
/// layer is tied to tok_emb.
struct EncoderParams {
  Param tok_emb;  // [V x d]
  Param pos_emb;  // [max_len x d]
  std::vector<EncoderLayerParams> layers;

  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
  static ShapeList shapes(const EncoderConfig& cfg, const std::string& prefix = "encoder.");

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "tok_emb", self.tok_emb);
    f(prefix + "pos_emb", self.pos_emb);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      EncoderLayerParams::each(self.layers[i], prefix + "layers." + std::to_string(i) + ".", f);
    }
  }
};

struct EncoderLayerVars {
  AttentionVars attn;
  LayerNormVars ln1;
  FeedForwardVars ffn;
  LayerNormVars ln2;
};

struct EncoderVars {
  Var tok_emb, pos_emb;
  std::vector<EncoderLayerVars> layers;
};

/// Which encoder tensors are trainable leaves on the graph.
struct EncoderTrainable {
  bool embeddings = false;
  std::size_t top_layers = 0;

  static EncoderTrainable none() { return {}; }
  static EncoderTrainable all(std::size_t n_layers) { return {true, n_layers}; }
};

EncoderVars bind_encoder(Graph& g, EncoderParams& p, EncoderTrainable trainable);
EncoderVars bind_encoder(Graph& g, const EncoderParams& p);

/// Final hidden states H for a padded batch, stacked as [rows*seq_len x d].
struct EncoderOutput {
  Var hidden;
  std::size_t rows = 0;
  std::size_t seq_len = 0;
  std::vector<std::uint8_t> mask;

  /// H of one batch row, [seq_len x d] including padding rows.
  Var row(std::size_t b) const { return slice_rows(hidden, b * seq_len, seq_len); }
};

EncoderOutput encoder_forward(const EncoderVars& vars, const EncoderConfig& cfg, const Batch& batch,
                              bool train_mode, Rng* rng);

/// Masked-token loss restricted to the corrupted positions, logits tied to
/// the token embedding. A batch where nothing got selected is re-drawn; if
/// repeated draws still select nothing, one position is forced.
Var mlm_loss(const EncoderVars& vars, const EncoderConfig& cfg, std::span<const std::vector<int>> sentences,
             const CorruptionPolicy& policy, const Vocabulary& vocab, Rng& rng, bool train_mode = true);

struct PretrainConfig {
  std::size_t steps = 1500;
  double peak_lr = 2e-3;
  std::size_t warmup_steps = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  CorruptionPolicy corruption;
  std::size_t log_every = 50;

  void validate() const;
};

struct LossRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double eval_metric = -1.0;  // negative when no evaluation ran
};

using LossCallback = std::function<void(const LossRecord&)>;

/// MLM pretraining of a freshly initialised encoder on `corpus`. Returns the
/// trained parameters; the loss log receives one record per log_every steps
/// plus the final step.
EncoderParams pretrain_mlm(std::span<const std::string> corpus, const Vocabulary& vocab,
                           const EncoderConfig& cfg, const PretrainConfig& train,
                           std::vector<LossRecord>* log = nullptr, const LossCallback& on_log = {});

/// Parameters that pretrain_mlm starts from for this (cfg, seed).
EncoderParams initial_encoder(const EncoderConfig& cfg, std::uint64_t seed);

}  // namespace blab
