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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blab/evaluation.hpp"
#include "blab/model.hpp"

namespace blab {

/// Argmax decoding from <bos> until <eos> or max_tokens (0 means the
/// longest the decoder can position). Ties go to the lowest id. Framing ids
/// other than <eos> and <unk> are never emitted. The result ends with <eos>
/// when one was produced.
std::vector<int> greedy_decode(const Autobot& model, const Tensor& z, std::size_t max_tokens = 0);

/// Decoded text of a sentence vector.
std::string decode_vector(const Autobot& model, const Tensor& z);

/// encode -> bottleneck -> greedy decode.
std::string reconstruct(const Autobot& model, std::string_view text);

/// Mean latent difference between two attribute classes.
struct SteeringVector {
  Tensor v;
  std::size_t pos_count = 0;
  std::size_t neg_count = 0;
  std::string source;
};

/// v = mean z(pos) - mean z(neg) over at most max_per_class sentences each.
SteeringVector compute_steering_vector(const Autobot& model, std::span<const std::string> pos,
                                       std::span<const std::string> neg, std::size_t max_per_class = 100,
                                       std::string source = {});

/// z + alpha * v
Tensor shift(const Tensor& z, const Tensor& v, double alpha);

struct TransferResult {
  double alpha = 0.0;
  std::string input;
  std::string output;
  double z_norm_before = 0.0;
  double z_norm_after = 0.0;
  Tensor z_shifted;
};

TransferResult transfer(const Autobot& model, std::string_view text, const SteeringVector& v, double alpha);

/// Decodes (1 - t) z_a + t z_b for `steps` evenly spaced t in [0, 1].
std::vector<std::string> interpolate_vectors(const Autobot& model, const Tensor& za, const Tensor& zb,
                                             std::size_t steps);
std::vector<std::string> interpolate(const Autobot& model, std::string_view a, std::string_view b, std::size_t steps);

struct SweepRow {
  double alpha = 0.0;
  double accuracy = 0.0;
  double self_bleu = 0.0;
  std::size_t n = 0;
};

/// For every alpha, moves each sentence toward the opposite label
/// (negatives by +alpha v, positives by -alpha v) and scores the outputs:
/// accuracy is the fraction the classifier assigns the target label,
/// self-BLEU compares outputs with their inputs. Sentences whose label is
/// neither class are skipped.
std::vector<SweepRow> alpha_sweep(const Autobot& model, std::span<const LabeledText> corpus, const SteeringVector& v,
                                  std::span<const double> alphas, const BowClassifier& classifier,
                                  const std::string& positive_label = "pos", const std::string& negative_label = "neg",
                                  const BleuConfig& bleu = {});

Report sweep_report(std::span<const SweepRow> rows);

inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  return grid;
}

/// Named steering vectors as a JSON document.
void save_steering_vectors(const std::filesystem::path& path, const std::map<std::string, SteeringVector>& vectors);
std::map<std::string, SteeringVector> load_steering_vectors(const std::filesystem::path& path);

}  // namespace blab
