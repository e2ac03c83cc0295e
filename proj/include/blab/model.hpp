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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blab/bottleneck.hpp"
#include "blab/config.hpp"
#include "blab/decoder.hpp"
#include "blab/encoder.hpp"
#include "blab/text.hpp"

namespace blab {

/// Linear classifier over sentence features (z, or [u, v, |u-v|] for pairs).
struct ClassifierHead {
  std::vector<std::string> classes;
  Param weight;  // [features x classes]
  Param bias;    // [classes]

  static ClassifierHead init(std::vector<std::string> classes, std::size_t features, Rng& rng);
  std::size_t features() const { return weight.value.rows(); }
  int class_index(const std::string& label) const;

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "weight", self.weight);
    f(prefix + "bias", self.bias);
  }
};

/// Frozen encoder + sentence bottleneck + gated single-vector decoder.
struct Autobot {
  ModelConfig config;
  Vocabulary vocab;
  EncoderParams encoder;
  BottleneckParams bottleneck;
  DecoderParams decoder;
  std::optional<ClassifierHead> head;

  /// Fresh bottleneck and decoder around an existing encoder; the decoder
  /// embedding starts as a copy of the encoder's.
  static Autobot assemble(ModelConfig config, Vocabulary vocab, EncoderParams encoder, std::uint64_t seed);
  /// Everything freshly initialised.
  static Autobot initialize(ModelConfig config, Vocabulary vocab, std::uint64_t seed);

  template <class Self, class F>
  static void each(Self& self, F&& f) {
    EncoderParams::each(self.encoder, "encoder.", f);
    BottleneckParams::each(self.bottleneck, "bottleneck.", f);
    DecoderParams::each(self.decoder, "decoder.", f);
    if (self.head) ClassifierHead::each(*self.head, "head.", f);
  }

  /// <cls> text <sep> ids, truncated to max_len.
  std::vector<int> encode_text(std::string_view text) const;
  /// Content ids the decoder is trained to emit for `text`.
  std::vector<int> target_ids(std::string_view text) const;
};

/// z for each text (rows of a [n x d] tensor), computed in inference mode.
Tensor sentence_vectors(const Autobot& model, std::span<const std::string> texts,
                        PoolingMode mode = PoolingMode::bottleneck);
Tensor sentence_vector(const Autobot& model, std::string_view text, PoolingMode mode = PoolingMode::bottleneck);

/// Bit-exact comparison of every tensor (names and values).
bool same_parameters(const Autobot& a, const Autobot& b);

}  // namespace blab
