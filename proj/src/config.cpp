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

#include "blab/config.hpp"

namespace blab {

void EncoderConfig::validate() const {
  if (vocab_size < static_cast<std::size_t>(kNumReserved)) {
    throw ConfigError("model.vocab_size must cover the reserved tokens");
  }
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || ffn_mult == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must be divisible by model.n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (max_len < 3) throw ConfigError("model.max_len must be >= 3");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (bottleneck_heads == 0 || encoder.d_model % bottleneck_heads != 0) {
    throw ConfigError("model.bottleneck_heads must divide model.d_model");
  }
}

void FreezePolicy::validate(std::size_t n_layers) const {
  if (unfrozen_encoder_top_k > n_layers) {
    throw ConfigError("freeze.unfrozen_encoder_top_k (" + std::to_string(unfrozen_encoder_top_k) +
                      ") exceeds the encoder depth (" + std::to_string(n_layers) + ")");
  }
  if (unfrozen_encoder_top_k == 0 && !train_bottleneck && !train_decoder) {
    throw ConfigError("freeze: nothing is trainable");
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (steps > 0 && (warmup_steps == 0 || warmup_steps > steps)) {
    throw ConfigError("train.warmup_steps must lie in [1, train.steps]");
  }
  if (!(peak_lr >= 0.0)) throw ConfigError("train.peak_lr must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be >= 0");
  if (eval_every == 0 || log_every == 0) throw ConfigError("train.eval_every and train.log_every must be positive");
  corruption.validate();
}

void FinetuneConfig::validate() const {
  if (batch_size == 0) throw ConfigError("finetune.batch_size must be positive");
  if (steps > 0 && (warmup_steps == 0 || warmup_steps > steps)) {
    throw ConfigError("finetune.warmup_steps must lie in [1, finetune.steps]");
  }
  if (!(peak_lr >= 0.0)) throw ConfigError("finetune.peak_lr must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("finetune.clip_norm must be >= 0");
}

}  // namespace blab
