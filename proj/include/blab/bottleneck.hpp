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

#include <string>
#include <vector>

#include "blab/config.hpp"
#include "blab/encoder.hpp"
#include "blab/layers.hpp"

namespace blab {

/// Query/key/value projections of the sentence bottleneck. There is no
/// output projection: the head outputs are concatenated into z directly.
struct BottleneckParams {
  Param wq, wk, wv;  // each [d_model x d_model], heads sliced by column
  std::size_t n_heads = 1;

  static BottleneckParams init(std::size_t d_model, std::size_t n_heads, Rng& rng);
  static ShapeList shapes(std::size_t d_model, const std::string& prefix = "bottleneck.");

  template <class Self, class F>
  static void each(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "wq", self.wq);
    f(prefix + "wk", self.wk);
    f(prefix + "wv", self.wv);
  }
};

struct BottleneckVars {
  Var wq, wk, wv;
  std::size_t n_heads = 1;
};

template <class P>
BottleneckVars bind_bottleneck(Graph& g, P& p, bool trainable) {
  return {bind_param(g, p.wq, trainable), bind_param(g, p.wk, trainable),
          bind_param(g, p.wv, trainable), p.n_heads};
}

/// Sentence vectors z, one row per batch row: [rows x d_model]. For each
/// head the <cls> state queries every non-pad position of H. When
/// `head_weights` is given it receives the [1 x seq_len] attention weights
/// in (row, head) order.
Var bottleneck_forward(const BottleneckVars& vars, const EncoderOutput& h,
                       std::vector<Var>* head_weights = nullptr);

enum class PoolingMode { mean, max, cls, bottleneck };

const char* pooling_name(PoolingMode mode);
PoolingMode parse_pooling(const std::string& name);

/// Parameter-free pooling over non-pad positions ([rows x d_model]).
/// PoolingMode::bottleneck is rejected here; use bottleneck_forward.
Var pool(const EncoderOutput& h, PoolingMode mode);

/// Dispatches to pool() or bottleneck_forward().
Var sentence_representation(const EncoderOutput& h, PoolingMode mode, const BottleneckVars* bottleneck);

struct ParamCountReport {
  ModelConfig config;
  std::size_t encoder = 0;
  std::size_t bottleneck = 0;
  std::size_t decoder = 0;
  std::size_t decoder_embeddings = 0;  // token + position tables inside `decoder`
  double overhead_ratio = 0.0;         // (bottleneck + decoder) / encoder

  /// Human-readable report, including the published reference figures and
  /// how they relate to these counts.
  std::string render() const;
};

ParamCountReport count_added_params(const ModelConfig& cfg);

/// d_model 768, 12 heads, 12 encoder layers, vocab 50265, max_len 128, one
/// decoder layer.
ModelConfig published_base_config();

}  // namespace blab
