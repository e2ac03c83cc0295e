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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "blab/text.hpp"

namespace blab {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t max_len = 32;
  double dropout = 0.1;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t ffn_width() const { return ffn_mult * d_model; }
  void validate() const;
};

/// Shapes of the whole autoencoder. The decoder shares d_model, head count,
/// FFN width and max_len with the encoder.
struct ModelConfig {
  EncoderConfig encoder;
  std::size_t bottleneck_heads = 4;
  std::size_t decoder_layers = 1;

  void validate() const;
};

/// Which parameter groups an optimisation step may change.
struct FreezePolicy {
  std::size_t unfrozen_encoder_top_k = 0;
  bool train_bottleneck = true;
  bool train_decoder = true;

  void validate(std::size_t n_layers) const;
};

struct TrainConfig {
  std::size_t steps = 3000;
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  CorruptionPolicy corruption;
  double clip_norm = 0.0;  // global gradient norm cap, 0 = off
  std::size_t eval_every = 500;
  std::size_t log_every = 50;

  void validate() const;
};

struct FinetuneConfig {
  std::size_t steps = 600;
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;

  void validate() const;
};

}  // namespace blab
