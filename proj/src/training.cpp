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

#include "blab/training.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <utility>

#include "blab/generation.hpp"

namespace blab {

namespace {

constexpr std::size_t kFinetuneLogEvery = 50;

std::vector<int> strip_framing(const std::vector<int>& ids) {
  std::vector<int> out;
  for (int id : ids) {
    if (id != kCls && id != kSep) out.push_back(id);
  }
  return out;
}

bool should_log(std::size_t step, std::size_t every, std::size_t last) {
  return step == 1 || step % every == 0 || step == last;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

Var head_logits(Graph& g, const ClassifierHead& head, Var features) {
  return add_row(matmul(features, g.constant(head.weight.value)), g.constant(head.bias.value));
}

Var pair_features(Var z, std::size_t pairs) {
  const Var u = slice_rows(z, 0, pairs);
  const Var v = slice_rows(z, pairs, pairs);
  const std::vector<Var> parts{u, v, abs(sub(u, v))};
  return concat_cols(parts);
}

double fraction_equal(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

}  // namespace

std::vector<Param*> trainable_params(Autobot& model, const FreezePolicy& policy) {
  const std::size_t n = model.config.encoder.n_layers;
  policy.validate(n);
  std::vector<std::string> prefixes;
  for (std::size_t i = n - policy.unfrozen_encoder_top_k; i < n; ++i) {
    prefixes.push_back("encoder.layers." + std::to_string(i) + ".");
  }
  if (policy.train_bottleneck) prefixes.emplace_back("bottleneck.");
  if (policy.train_decoder) prefixes.emplace_back("decoder.");
  std::vector<Param*> out;
  Autobot::each(model, [&](const std::string& name, Param& p) {
    for (const auto& pre : prefixes) {
      if (name.starts_with(pre)) {
        out.push_back(&p);
        return;
      }
    }
  });
  return out;
}

double denoising_step(Autobot& model, std::span<const std::vector<int>> clean, const CorruptionPolicy& corruption,
                      Rng& rng, AdamState& adam, const FreezePolicy& policy, double lr, double clip_norm) {
  if (clean.empty()) throw ConfigError("denoising_step: empty batch");
  const std::vector<Param*> params = trainable_params(model, policy);
  for (Param* p : params) p->zero_grad();

  const auto& cfg = model.config;
  const std::size_t top_k = policy.unfrozen_encoder_top_k;
  Graph g(Precision::f32);
  const EncoderVars enc = top_k > 0 ? bind_encoder(g, model.encoder, EncoderTrainable{false, top_k})
                                    : bind_encoder(g, std::as_const(model.encoder));
  const BottleneckVars bott = bind_bottleneck(g, model.bottleneck, policy.train_bottleneck);
  const DecoderVars dec = bind_decoder(g, model.decoder, policy.train_decoder);

  std::vector<std::vector<int>> corrupted;
  std::vector<std::vector<int>> contents;
  for (const auto& ids : clean) {
    corrupted.push_back(corrupt(ids, corruption, model.vocab, rng).ids);
    contents.push_back(strip_framing(ids));
  }
  // A frozen encoder is run deterministically; dropout only where it learns.
  const EncoderOutput h = encoder_forward(enc, cfg.encoder, make_batch(corrupted), top_k > 0, &rng);
  const Var z = bottleneck_forward(bott, h);
  const Var loss = reconstruction_loss(dec, cfg, z, contents, policy.train_decoder, &rng);
  g.backward(loss);
  clip_grad_norm(params, clip_norm);
  adam.step(params, lr);
  return loss.value().item();
}

std::size_t heldout_count(std::size_t corpus_size) { return corpus_size / 10; }

TrainResult train_autoencoder(Autobot& model, std::span<const std::string> corpus, const TrainConfig& cfg,
                              const FreezePolicy& policy, const LossCallback& on_log) {
  cfg.validate();
  policy.validate(model.config.encoder.n_layers);
  if (corpus.empty()) throw ConfigError("train: corpus is empty");
  const std::size_t held = heldout_count(corpus.size());
  const std::size_t train_n = corpus.size() - held;
  const std::span<const std::string> heldout = corpus.subspan(train_n);

  std::vector<std::vector<int>> encoded;
  for (const auto& line : corpus.first(train_n)) encoded.push_back(model.encode_text(line));

  TrainResult result;
  const LrSchedule schedule{cfg.peak_lr, cfg.warmup_steps, cfg.steps};
  AdamState adam;
  Rng rng = Rng(cfg.seed).derive(0x64656e6fULL);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<std::vector<int>> batch;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) batch.push_back(encoded[rng.below(encoded.size())]);
    const double lr = lr_at(schedule, step);
    const double loss = denoising_step(model, batch, cfg.corruption, rng, adam, policy, lr, cfg.clip_norm);

    const bool evaluate = held > 0 && (step % cfg.eval_every == 0 || step == cfg.steps);
    if (evaluate || should_log(step, cfg.log_every, cfg.steps)) {
      LossRecord rec{step, lr, loss, -1.0};
      if (evaluate) rec.eval_metric = reconstruction_score(model, heldout).token_accuracy;
      result.log.push_back(rec);
      if (on_log) on_log(rec);
    }
  }
  if (held > 0) result.heldout = reconstruction_score(model, heldout);
  return result;
}

void write_loss_log(const std::filesystem::path& path, std::span<const LossRecord> log) {
  const bool with_eval = std::any_of(log.begin(), log.end(), [](const LossRecord& r) { return r.eval_metric >= 0; });
  std::ostringstream out;
  out << std::setprecision(9);
  out << (with_eval ? "step,lr,loss,eval_metric\n" : "step,lr,loss\n");
  for (const auto& r : log) {
    out << r.step << ',' << r.lr << ',' << r.loss;
    if (with_eval) {
      out << ',';
      if (r.eval_metric >= 0) out << r.eval_metric;
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << out.str();
}

FinetuneResult siamese_finetune(const Autobot& model, std::span<const PairRecord> pairs,
                                const std::vector<std::string>& classes, const FinetuneConfig& cfg,
                                PoolingMode mode) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("siamese finetune: no pairs");
  FinetuneResult r{model, {}, 0.0};
  Autobot& m = r.model;
  const std::size_t d = m.config.encoder.d_model;
  Rng init_rng = Rng(cfg.seed).derive(0x5ead0001ULL);
  m.head = ClassifierHead::init(classes, 3 * d, init_rng);
  std::vector<int> labels;
  for (const auto& p : pairs) labels.push_back(m.head->class_index(p.label));

  std::vector<Param*> params;
  EncoderParams::each(m.encoder, "", [&](const std::string&, Param& p) { params.push_back(&p); });
  if (mode == PoolingMode::bottleneck) {
    BottleneckParams::each(m.bottleneck, "", [&](const std::string&, Param& p) { params.push_back(&p); });
  }
  ClassifierHead::each(*m.head, "", [&](const std::string&, Param& p) { params.push_back(&p); });

  const LrSchedule schedule{cfg.peak_lr, cfg.warmup_steps, cfg.steps};
  AdamState adam;
  Rng rng = Rng(cfg.seed).derive(0x7369616dULL);
  const std::size_t n_layers = m.config.encoder.n_layers;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<std::vector<int>> ids(2 * cfg.batch_size);
    std::vector<int> targets;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const auto& p = pairs[rng.below(pairs.size())];
      ids[i] = m.encode_text(p.first);
      ids[cfg.batch_size + i] = m.encode_text(p.second);
      targets.push_back(m.head->class_index(p.label));
    }
    for (Param* p : params) p->zero_grad();
    Graph g(Precision::f32);
    const EncoderVars enc = bind_encoder(g, m.encoder, EncoderTrainable::all(n_layers));
    const BottleneckVars bott = bind_bottleneck(g, m.bottleneck, true);
    const Var w = g.param(m.head->weight, true);
    const Var b = g.param(m.head->bias, true);
    const EncoderOutput h = encoder_forward(enc, m.config.encoder, make_batch(ids), true, &rng);
    const Var z = sentence_representation(h, mode, mode == PoolingMode::bottleneck ? &bott : nullptr);
    const Var logits = add_row(matmul(pair_features(z, cfg.batch_size), w), b);
    const Var loss = nll_loss(logits, targets, -1);
    g.backward(loss);
    clip_grad_norm(params, cfg.clip_norm);
    const double lr = lr_at(schedule, step);
    adam.step(params, lr);
    if (should_log(step, kFinetuneLogEvery, cfg.steps)) r.log.push_back({step, lr, loss.value().item(), -1.0});
  }
  r.train_accuracy = fraction_equal(classify_pairs(m, pairs, mode), labels);
  return r;
}

FinetuneResult classifier_finetune(const Autobot& model, std::span<const LabeledText> data,
                                   std::vector<std::string> classes, const FinetuneConfig& cfg, bool head_only) {
  cfg.validate();
  if (data.empty()) throw ConfigError("classifier finetune: no sentences");
  if (classes.empty()) {
    std::set<std::string> distinct;
    for (const auto& row : data) distinct.insert(row.label);
    classes.assign(distinct.begin(), distinct.end());
  }
  FinetuneResult r{model, {}, 0.0};
  Autobot& m = r.model;
  Rng init_rng = Rng(cfg.seed).derive(0xc1a55001ULL);
  m.head = ClassifierHead::init(std::move(classes), m.config.encoder.d_model, init_rng);
  std::vector<int> labels;
  std::vector<std::string> texts;
  for (const auto& row : data) {
    labels.push_back(m.head->class_index(row.label));
    texts.push_back(row.text);
  }

  std::vector<Param*> params;
  if (!head_only) {
    EncoderParams::each(m.encoder, "", [&](const std::string&, Param& p) { params.push_back(&p); });
    BottleneckParams::each(m.bottleneck, "", [&](const std::string&, Param& p) { params.push_back(&p); });
  }
  ClassifierHead::each(*m.head, "", [&](const std::string&, Param& p) { params.push_back(&p); });

  const LrSchedule schedule{cfg.peak_lr, cfg.warmup_steps, cfg.steps};
  AdamState adam;
  Rng rng = Rng(cfg.seed).derive(0x636c6173ULL);
  const std::size_t n_layers = m.config.encoder.n_layers;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<std::vector<int>> ids;
    std::vector<int> targets;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const std::size_t k = rng.below(data.size());
      ids.push_back(m.encode_text(texts[k]));
      targets.push_back(labels[k]);
    }
    for (Param* p : params) p->zero_grad();
    Graph g(Precision::f32);
    const EncoderVars enc = head_only ? bind_encoder(g, std::as_const(m.encoder))
                                      : bind_encoder(g, m.encoder, EncoderTrainable::all(n_layers));
    const BottleneckVars bott = bind_bottleneck(g, m.bottleneck, !head_only);
    const Var w = g.param(m.head->weight, true);
    const Var b = g.param(m.head->bias, true);
    const EncoderOutput h = encoder_forward(enc, m.config.encoder, make_batch(ids), !head_only, &rng);
    const Var z = bottleneck_forward(bott, h);
    const Var loss = nll_loss(add_row(matmul(z, w), b), targets, -1);
    g.backward(loss);
    clip_grad_norm(params, cfg.clip_norm);
    const double lr = lr_at(schedule, step);
    adam.step(params, lr);
    if (should_log(step, kFinetuneLogEvery, cfg.steps)) r.log.push_back({step, lr, loss.value().item(), -1.0});
  }
  r.train_accuracy = fraction_equal(classify(m, texts), labels);
  return r;
}

std::vector<int> classify(const Autobot& model, std::span<const std::string> texts) {
  if (!model.head) throw ConfigError("classify: model has no classifier head");
  if (model.head->features() != model.config.encoder.d_model) {
    throw ConfigError("classify: head expects pair features");
  }
  const Tensor z = sentence_vectors(model, texts);
  Graph g(Precision::f32);
  return argmax_rows(head_logits(g, *model.head, g.constant(z)).value());
}

std::vector<int> classify_pairs(const Autobot& model, std::span<const PairRecord> pairs, PoolingMode mode) {
  if (!model.head) throw ConfigError("classify_pairs: model has no classifier head");
  if (model.head->features() != 3 * model.config.encoder.d_model) {
    throw ConfigError("classify_pairs: head expects single-sentence features");
  }
  if (pairs.empty()) return {};
  std::vector<std::string> texts(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    texts[i] = pairs[i].first;
    texts[pairs.size() + i] = pairs[i].second;
  }
  const Tensor z = sentence_vectors(model, texts, mode);
  Graph g(Precision::f32);
  const Var features = pair_features(g.constant(z), pairs.size());
  return argmax_rows(head_logits(g, *model.head, features).value());
}

}  // namespace blab
