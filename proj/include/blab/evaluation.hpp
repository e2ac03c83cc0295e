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
#include <string_view>
#include <variant>
#include <vector>

#include "blab/bottleneck.hpp"
#include "blab/config.hpp"
#include "blab/model.hpp"
#include "blab/text.hpp"

namespace blab {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// BLEU

enum class BleuSmoothing { none, add_epsilon };

struct BleuConfig {
  int max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::none;
  double epsilon = 1e-9;
};

/// Corpus-level BLEU of candidates against one reference each: clipped
/// n-gram precisions up to max_n, uniform geometric mean, brevity penalty
/// exp(1 - r/c) when c < r. A zero precision gives 0 unless smoothing adds
/// epsilon to the zero match counts.
double corpus_bleu(std::span<const std::string> candidates, std::span<const std::string> references,
                   const BleuConfig& cfg = {});

/// BLEU of transferred outputs against their own inputs.
inline double self_bleu(std::span<const std::string> outputs, std::span<const std::string> inputs,
                        const BleuConfig& cfg = {}) {
  return corpus_bleu(outputs, inputs, cfg);
}

// ---------------------------------------------------------------------------
// Correlation and similarity

/// Pearson correlation of average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> average_ranks(std::span<const double> xs);

/// dot / (|u| |v|), clamped to [-1, 1]; zero vectors are an error.
double cosine(std::span<const double> u, std::span<const double> v);

/// Positional agreement over the shorter sequence divided by the longer
/// length; two empty sequences agree fully.
double token_accuracy(std::span<const int> predicted, std::span<const int> target);
int exact_match(std::span<const int> predicted, std::span<const int> target);

// ---------------------------------------------------------------------------
// Bag-of-words transfer classifier

struct BowClassifier {
  std::vector<std::string> classes;
  Vocabulary vocab;
  Tensor weight;  // [classes x (vocab + 1)], last column is the bias
  std::string trained_on;

  std::vector<double> scores(std::string_view text) const;
  std::string predict(std::string_view text) const;
  double accuracy(std::span<const LabeledText> data) const;
};

struct BowTrainLog {
  std::vector<double> loss;  // full-batch loss before each epoch's update
};

/// Multinomial logistic regression on token counts, full-batch gradient
/// descent from zero weights.
BowClassifier train_transfer_classifier(std::span<const LabeledText> data, std::size_t epochs = 200,
                                        double lr = 0.5, BowTrainLog* log = nullptr);

// ---------------------------------------------------------------------------
// Model-based evaluations

/// Spearman between cosine(rep(s1), rep(s2)) and the gold scores.
double sts_eval(const Autobot& model, std::span<const PairRecord> pairs, PoolingMode mode = PoolingMode::bottleneck);
/// The cosine column sts_eval correlates.
std::vector<double> pair_cosines(const Autobot& model, std::span<const PairRecord> pairs,
                                 PoolingMode mode = PoolingMode::bottleneck);

struct ReconstructionScore {
  double token_accuracy = 0.0;
  double exact_match = 0.0;
  std::size_t sentences = 0;
};

/// Greedy reconstruction quality over `texts`.
ReconstructionScore reconstruction_score(const Autobot& model, std::span<const std::string> texts);

// ---------------------------------------------------------------------------
// Reports

/// Column-oriented table written as CSV (header row) and as JSON.
struct Report {
  using Cell = std::variant<double, long long, std::string>;

  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::string> notes;  // JSON only

  void add_row(std::vector<Cell> row);
  std::string csv() const;
  std::string json() const;
  void write(const std::filesystem::path& csv_path) const;  // also writes .json alongside
};

struct PoolingAblationRow {
  PoolingMode mode;
  double spearman = 0.0;
  double train_accuracy = 0.0;
};

/// Siamese finetuning once per pooling mode (mean, max, cls, beta), each
/// evaluated on the scored pairs.
std::vector<PoolingAblationRow> pooling_ablation(const Autobot& model, std::span<const PairRecord> finetune_pairs,
                                                 std::span<const PairRecord> eval_pairs, const FinetuneConfig& cfg);

Report pooling_report(std::span<const PoolingAblationRow> rows);

}  // namespace blab
