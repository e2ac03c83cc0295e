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

#include "blab/pipeline.hpp"

namespace blab {

std::vector<std::string> texts_of(std::span<const LabeledText> rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.text);
  return out;
}

Autobot pretrain_autobot(const RunConfig& cfg, std::span<const std::string> corpus, const Vocabulary& vocab,
                         std::vector<LossRecord>* log, const LossCallback& on_log) {
  cfg.validate();
  ModelConfig mc = cfg.model;
  mc.encoder.vocab_size = vocab.size();
  EncoderParams enc = pretrain_mlm(corpus, vocab, mc.encoder, cfg.pretrain_config(), log, on_log);
  return Autobot::assemble(mc, vocab, std::move(enc), cfg.seed);
}

DeskRun run_desk_pipeline(const RunConfig& cfg, const LossCallback& on_log) {
  cfg.validate();
  DeskRun run;
  run.corpus = generate_toy_corpus(cfg.corpus_spec());
  run.texts = texts_of(run.corpus);
  run.vocab = build_vocab(run.texts, cfg.vocab_min_count);
  run.pretrained = pretrain_autobot(cfg, run.texts, run.vocab, &run.pretrain_log, on_log);
  run.trained = run.pretrained;
  run.train = train_autoencoder(run.trained, run.texts, cfg.train_config(), cfg.freeze, on_log);
  return run;
}

SteeringSplit steering_split(std::span<const LabeledText> corpus, std::size_t steer_lines,
                             const std::string& positive_label, const std::string& negative_label) {
  SteeringSplit s;
  const std::size_t cut = std::min(steer_lines, corpus.size());
  for (std::size_t i = 0; i < cut; ++i) {
    if (corpus[i].label == positive_label) s.positive.push_back(corpus[i].text);
    if (corpus[i].label == negative_label) s.negative.push_back(corpus[i].text);
  }
  s.eval.assign(corpus.begin() + static_cast<std::ptrdiff_t>(cut), corpus.end());
  return s;
}

}  // namespace blab
