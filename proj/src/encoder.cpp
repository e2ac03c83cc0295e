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

#include "blab/encoder.hpp"

#include "blab/optim.hpp"

namespace blab {

namespace {

constexpr int kMaxRedraws = 10;

template <class P>
EncoderVars bind_encoder_impl(Graph& g, P& p, EncoderTrainable trainable) {
  EncoderVars v;
  v.tok_emb = bind_param(g, p.tok_emb, trainable.embeddings);
  v.pos_emb = bind_param(g, p.pos_emb, trainable.embeddings);
  const std::size_t n = p.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const bool on = i + trainable.top_layers >= n;
    auto& layer = p.layers[i];
    v.layers.push_back({bind_attention(g, layer.attn, on), bind_layer_norm(g, layer.ln1, on),
                        bind_feed_forward(g, layer.ffn, on), bind_layer_norm(g, layer.ln2, on)});
  }
  return v;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  p.tok_emb = normal_param({cfg.vocab_size, cfg.d_model}, rng);
  p.pos_emb = normal_param({cfg.max_len, cfg.d_model}, rng);
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    EncoderLayerParams layer;
    layer.attn = AttentionParams::init(cfg.d_model, rng);
    layer.ln1 = LayerNormParams::init(cfg.d_model);
    layer.ffn = FeedForwardParams::init(cfg.d_model, cfg.ffn_width(), rng);
    layer.ln2 = LayerNormParams::init(cfg.d_model);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ShapeList EncoderParams::shapes(const EncoderConfig& cfg, const std::string& prefix) {
  ShapeList out;
  out.push_back({prefix + "tok_emb", {cfg.vocab_size, cfg.d_model}});
  out.push_back({prefix + "pos_emb", {cfg.max_len, cfg.d_model}});
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    const std::string lp = prefix + "layers." + std::to_string(i) + ".";
    AttentionParams::shapes(lp + "attn.", cfg.d_model, out);
    LayerNormParams::shapes(lp + "ln1.", cfg.d_model, out);
    FeedForwardParams::shapes(lp + "ffn.", cfg.d_model, cfg.ffn_width(), out);
    LayerNormParams::shapes(lp + "ln2.", cfg.d_model, out);
  }
  return out;
}

EncoderVars bind_encoder(Graph& g, EncoderParams& p, EncoderTrainable trainable) {
  return bind_encoder_impl(g, p, trainable);
}

EncoderVars bind_encoder(Graph& g, const EncoderParams& p) {
  return bind_encoder_impl(g, p, EncoderTrainable::none());
}

EncoderOutput encoder_forward(const EncoderVars& vars, const EncoderConfig& cfg, const Batch& batch,
                              bool train_mode, Rng* rng) {
  if (batch.seq_len > cfg.max_len) {
    throw NumericError("encoder_forward: sequence length " + std::to_string(batch.seq_len) +
                       " exceeds max_len " + std::to_string(cfg.max_len));
  }
  for (int id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw NumericError("encoder_forward: token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(cfg.vocab_size));
    }
  }
  std::vector<int> positions(batch.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % batch.seq_len);

  Var x = add(gather_rows(vars.tok_emb, batch.ids), gather_rows(vars.pos_emb, positions));
  x = maybe_dropout(x, cfg.dropout, train_mode, rng);
  for (const auto& layer : vars.layers) {
    Var attended = self_attention(layer.attn, x, batch.seq_len, cfg.n_heads, batch.mask, false);
    attended = maybe_dropout(attended, cfg.dropout, train_mode, rng);
    x = apply_layer_norm(layer.ln1, add(x, attended));
    Var ff = maybe_dropout(feed_forward(layer.ffn, x), cfg.dropout, train_mode, rng);
    x = apply_layer_norm(layer.ln2, add(x, ff));
  }
  return EncoderOutput{x, batch.rows, batch.seq_len, batch.mask};
}

Var mlm_loss(const EncoderVars& vars, const EncoderConfig& cfg, std::span<const std::vector<int>> sentences,
             const CorruptionPolicy& policy, const Vocabulary& vocab, Rng& rng, bool train_mode) {
  std::vector<std::vector<int>> corrupted;
  std::vector<std::vector<std::size_t>> selected;
  std::size_t total_selected = 0;
  for (int attempt = 0; attempt < kMaxRedraws && total_selected == 0; ++attempt) {
    corrupted.clear();
    selected.clear();
    for (const auto& s : sentences) {
      auto c = corrupt(s, policy, vocab, rng);
      total_selected += c.selected.size();
      corrupted.push_back(std::move(c.ids));
      selected.push_back(std::move(c.selected));
    }
  }
  if (total_selected == 0) {
    // Force a single masked position so the loss stays defined.
    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t b = 0; b < sentences.size(); ++b) {
      for (std::size_t t = 0; t < sentences[b].size(); ++t) {
        if (!Vocabulary::is_reserved(sentences[b][t])) candidates.emplace_back(b, t);
      }
    }
    if (candidates.empty()) throw NumericError("mlm_loss: batch has no maskable tokens");
    const auto [b, t] = candidates[rng.below(candidates.size())];
    corrupted[b][t] = kMask;
    selected[b].push_back(t);
  }

  const Batch batch = make_batch(corrupted);
  const EncoderOutput out = encoder_forward(vars, cfg, batch, train_mode, &rng);
  std::vector<int> rows;
  std::vector<int> targets;
  for (std::size_t b = 0; b < sentences.size(); ++b) {
    for (std::size_t t : selected[b]) {
      rows.push_back(static_cast<int>(b * batch.seq_len + t));
      targets.push_back(sentences[b][t]);
    }
  }
  const Var picked = gather_rows(out.hidden, rows);
  const Var logits = matmul(picked, transpose(vars.tok_emb));
  return nll_loss(logits, targets, kPad);
}

void PretrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("pretrain.batch_size must be positive");
  if (steps > 0 && (warmup_steps == 0 || warmup_steps > steps)) {
    throw ConfigError("pretrain.warmup_steps must lie in [1, pretrain.steps]");
  }
  if (log_every == 0) throw ConfigError("pretrain.log_every must be positive");
  corruption.validate();
}

EncoderParams initial_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng init_rng(seed);
  return EncoderParams::init(cfg, init_rng);
}

EncoderParams pretrain_mlm(std::span<const std::string> corpus, const Vocabulary& vocab,
                           const EncoderConfig& cfg, const PretrainConfig& train,
                           std::vector<LossRecord>* log, const LossCallback& on_log) {
  if (corpus.empty()) throw ConfigError("pretrain: corpus is empty");
  train.validate();
  EncoderParams params = initial_encoder(cfg, train.seed);
  if (train.steps == 0) return params;

  std::vector<std::vector<int>> encoded;
  for (const auto& line : corpus) encoded.push_back(encode(vocab, line, cfg.max_len));

  std::vector<Param*> trainable;
  EncoderParams::each(params, "", [&](const std::string&, Param& p) { trainable.push_back(&p); });

  const LrSchedule schedule{train.peak_lr, train.warmup_steps, train.steps};
  AdamState adam;
  Rng rng = Rng(train.seed).derive(0x6d6c6dULL);
  for (std::size_t step = 1; step <= train.steps; ++step) {
    std::vector<std::vector<int>> batch;
    for (std::size_t i = 0; i < train.batch_size; ++i) batch.push_back(encoded[rng.below(encoded.size())]);
    for (Param* p : trainable) p->zero_grad();
    Graph g(Precision::f32);
    const EncoderVars vars = bind_encoder(g, params, EncoderTrainable::all(cfg.n_layers));
    const Var loss = mlm_loss(vars, cfg, batch, train.corruption, vocab, rng, true);
    g.backward(loss);
    const double lr = lr_at(schedule, step);
    adam.step(trainable, lr);
    if (step % train.log_every == 0 || step == train.steps || step == 1) {
      const LossRecord rec{step, lr, loss.value().item(), -1.0};
      if (log != nullptr) log->push_back(rec);
      if (on_log) on_log(rec);
    }
  }
  return params;
}

}  // namespace blab
