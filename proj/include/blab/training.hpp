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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "blab/evaluation.hpp"
#include "blab/model.hpp"
#include "blab/optim.hpp"

namespace blab {

/// Parameters an optimisation step may touch under `policy`, in the
/// Autobot::each order. Encoder embeddings are never in the partition.
std::vector<Param*> trainable_params(Autobot& model, const FreezePolicy& policy);

/// One denoising update on `clean` (encoded ids with <cls>/<sep>): corrupt,
/// encode, pool through the bottleneck, reconstruct the clean content and
/// step Adam over the trainable partition. Returns the batch loss.
double denoising_step(Autobot& model, std::span<const std::vector<int>> clean, const CorruptionPolicy& corruption,
                      Rng& rng, AdamState& adam, const FreezePolicy& policy, double lr, double clip_norm = 0.0);

struct TrainResult {
  std::vector<LossRecord> log;
  ReconstructionScore heldout;  // final evaluation, zero sentences if no held-out slice
};

/// Held-out slice used by train_autoencoder: the last 10% of lines.
std::size_t heldout_count(std::size_t corpus_size);

/// Denoising autoencoder training in place. Records carry held-out token
/// accuracy as eval_metric at every eval_every step and the final step.
TrainResult train_autoencoder(Autobot& model, std::span<const std::string> corpus, const TrainConfig& cfg,
                              const FreezePolicy& policy = {}, const LossCallback& on_log = {});

void write_loss_log(const std::filesystem::path& path, std::span<const LossRecord> log);

struct FinetuneResult {
  Autobot model;  // carries the trained head
  std::vector<LossRecord> log;
  double train_accuracy = 0.0;
};

/// Pair classification over [u, v, |u - v|], u and v pooled by `mode`.
/// Encoder, bottleneck (when used) and head are all trained; the decoder is
/// left alone.
FinetuneResult siamese_finetune(const Autobot& model, std::span<const PairRecord> pairs,
                                const std::vector<std::string>& classes, const FinetuneConfig& cfg,
                                PoolingMode mode = PoolingMode::bottleneck);

/// Sentence classification with a linear head over z. head_only keeps the
/// encoder and bottleneck frozen. An empty class list means the sorted
/// distinct labels of `data`.
FinetuneResult classifier_finetune(const Autobot& model, std::span<const LabeledText> data,
                                   std::vector<std::string> classes, const FinetuneConfig& cfg,
                                   bool head_only = false);

/// Predicted class index per row of a single-sentence head.
std::vector<int> classify(const Autobot& model, std::span<const std::string> texts);
/// Predicted class index per pair of a pair head.
std::vector<int> classify_pairs(const Autobot& model, std::span<const PairRecord> pairs,
                                PoolingMode mode = PoolingMode::bottleneck);

}  // namespace blab
