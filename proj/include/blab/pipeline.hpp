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

#include "blab/generation.hpp"
#include "blab/run_config.hpp"
#include "blab/training.hpp"

namespace blab {

std::vector<std::string> texts_of(std::span<const LabeledText> rows);

/// Vocabulary, MLM-pretrained encoder and freshly initialised bottleneck and
/// decoder, all seeded from cfg.seed.
Autobot pretrain_autobot(const RunConfig& cfg, std::span<const std::string> corpus, const Vocabulary& vocab,
                         std::vector<LossRecord>* log = nullptr, const LossCallback& on_log = {});

/// Toy corpus -> vocabulary -> MLM -> denoising autoencoder.
struct DeskRun {
  std::vector<LabeledText> corpus;
  std::vector<std::string> texts;
  Vocabulary vocab;
  Autobot pretrained;
  Autobot trained;
  std::vector<LossRecord> pretrain_log;
  TrainResult train;
};

DeskRun run_desk_pipeline(const RunConfig& cfg, const LossCallback& on_log = {});

/// Steering sentences come from the first `steer_lines` rows, evaluation
/// uses the rest, so the two never overlap.
struct SteeringSplit {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<LabeledText> eval;
};

SteeringSplit steering_split(std::span<const LabeledText> corpus, std::size_t steer_lines,
                             const std::string& positive_label = "pos", const std::string& negative_label = "neg");

}  // namespace blab
