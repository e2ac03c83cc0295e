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
#include <string>
#include <string_view>
#include <vector>

#include "blab/config.hpp"
#include "blab/encoder.hpp"
#include "blab/evaluation.hpp"
#include "blab/text.hpp"

namespace blab {

/// Everything a command-line run can configure. Loaded from a JSON object
/// with flat dotted keys ("train.steps": 3000); unknown keys are rejected.
/// The defaults are the desk profile used for the toy experiments.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  std::size_t corpus_count = 512;
  int vocab_min_count = 1;
  PretrainConfig pretrain;
  TrainConfig train;
  CorruptionPolicy corruption;
  FreezePolicy freeze;
  FinetuneConfig finetune;
  std::size_t steer_max_per_class = 100;
  std::vector<double> sweep_alphas;
  BleuConfig bleu;
  std::size_t classifier_epochs = 200;
  double classifier_lr = 0.5;

  RunConfig();

  /// Copies seed and corruption into the per-stage configs.
  void sync();
  /// Validates every field; called before any compute.
  void validate() const;

  PretrainConfig pretrain_config() const;
  TrainConfig train_config() const;
  FinetuneConfig finetune_config() const;
  ToyCorpusSpec corpus_spec() const;
};

/// Keys accepted in config files and --set overrides, in output order.
std::vector<std::string> run_config_keys();

/// Sets one key from a JSON value; throws ConfigError on unknown keys or
/// values of the wrong type.
void set_run_config_value(RunConfig& cfg, const std::string& key, std::string_view json_value);

/// Applies "key=value"; the value is parsed as JSON, or taken as a string.
void apply_override(RunConfig& cfg, std::string_view assignment);

RunConfig load_run_config(const std::filesystem::path& path);
/// Pretty-printed JSON object of every key.
std::string resolved_config_json(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace blab
