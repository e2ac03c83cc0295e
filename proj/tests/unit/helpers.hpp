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

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include "blab/model.hpp"
#include "blab/text.hpp"

namespace blab::test {

inline std::vector<std::string> tiny_corpus() {
  return {"the soup was great",  "the soup was awful",  "a cat sat quietly", "a dog sat loudly",
          "the cat was great",   "the dog was awful",   "a soup sat there",  "the cat sat there"};
}

inline ModelConfig tiny_config(std::size_t vocab_size) {
  ModelConfig mc;
  mc.encoder.vocab_size = vocab_size;
  mc.encoder.d_model = 8;
  mc.encoder.n_layers = 2;
  mc.encoder.n_heads = 2;
  mc.encoder.ffn_mult = 2;
  mc.encoder.max_len = 10;
  mc.encoder.dropout = 0.0;
  mc.bottleneck_heads = 2;
  mc.decoder_layers = 1;
  return mc;
}

inline Autobot tiny_model(std::uint64_t seed = 3) {
  const auto corpus = tiny_corpus();
  Vocabulary vocab = build_vocab(corpus);
  const ModelConfig mc = tiny_config(vocab.size());
  return Autobot::initialize(mc, std::move(vocab), seed);
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace blab::test
