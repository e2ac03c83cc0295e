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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "blab/rng.hpp"

namespace blab {

inline constexpr int kPad = 0;
inline constexpr int kCls = 1;
inline constexpr int kSep = 2;
inline constexpr int kMask = 3;
inline constexpr int kUnk = 4;
inline constexpr int kBos = 5;
inline constexpr int kEos = 6;
inline constexpr int kNumReserved = 7;

class TextError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Token <-> id mapping. Ids 0..6 are the reserved tokens; the rest are
/// sorted by (count descending, token ascending) when built from a corpus.
class Vocabulary {
 public:
  Vocabulary();
  /// Full token list including the reserved prefix, e.g. from a checkpoint.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view token) const;
  static bool is_reserved(int id) { return id >= 0 && id < kNumReserved; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

Vocabulary build_vocab(std::span<const std::string> corpus, int min_count = 1);

/// <cls> tokens... <sep>, truncated to at most max_len ids (>= 3) while
/// always ending in <sep>.
std::vector<int> encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len);
/// Space-joined tokens with every reserved id dropped.
std::string decode(const Vocabulary& vocab, std::span<const int> ids);
/// Content token ids only, no framing.
std::vector<int> content_ids(const Vocabulary& vocab, std::string_view text, std::size_t max_tokens);

struct CorruptionPolicy {
  double select_prob = 0.15;
  double mask_frac = 0.8;
  double random_frac = 0.1;
  double keep_frac = 0.1;

  void validate() const;
};

struct Corruption {
  std::vector<int> ids;
  std::vector<std::size_t> selected;
};

/// BERT-style corruption. Reserved positions are never selected; random
/// replacements draw only non-reserved ids.
Corruption corrupt(std::span<const int> ids, const CorruptionPolicy& policy, const Vocabulary& vocab,
                   Rng& rng);

/// Padded id matrix. mask is 1 exactly on non-<pad> positions.
struct Batch {
  std::size_t rows = 0;
  std::size_t seq_len = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> lengths;

  int at(std::size_t b, std::size_t t) const { return ids[b * seq_len + t]; }
  std::span<const std::uint8_t> row_mask(std::size_t b) const {
    return std::span<const std::uint8_t>(mask).subspan(b * seq_len, seq_len);
  }
};

Batch make_batch(std::span<const std::vector<int>> sequences);

// ---------------------------------------------------------------------------
// Synthetic corpus: "<determiner> <subject> <verb> <adverb> <adjective>".

struct ToyCorpusSpec {
  std::vector<std::string> determiners;
  std::vector<std::string> subjects;
  std::vector<std::string> verbs;
  std::vector<std::string> adverbs;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::size_t count = 512;
  std::uint64_t seed = 0;

  static ToyCorpusSpec desk_default();
  void validate() const;
};

inline constexpr std::size_t kToySlots = 5;

/// Slot choices of one templated sentence. The adjective index addresses
/// `positive` when `positive_polarity`, otherwise `negative`.
struct ToySentence {
  std::array<std::size_t, kToySlots> choice{};
  bool positive_polarity = true;

  std::string render(const ToyCorpusSpec& spec) const;
  std::size_t overlap(const ToySentence& other) const;
};

ToySentence sample_toy_sentence(const ToyCorpusSpec& spec, Rng& rng);

struct LabeledText {
  std::string label;
  std::string text;
};

std::vector<LabeledText> generate_toy_corpus(const ToyCorpusSpec& spec);

struct PairRecord {
  std::string label;
  std::optional<double> score;
  std::string first;
  std::string second;
};

/// Pairs scored by the number of template slots two sentences share (0..5).
std::vector<PairRecord> generate_toy_scored_pairs(const ToyCorpusSpec& spec, std::size_t count,
                                                  std::uint64_t seed);
/// Pairs labelled "same" / "different" by whether the adjectives share polarity.
std::vector<PairRecord> generate_toy_polarity_pairs(const ToyCorpusSpec& spec, std::size_t count,
                                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<LabeledText> load_labeled_tsv(const std::filesystem::path& path);

enum class PairKind { scored, labeled };
std::vector<PairRecord> load_pairs_tsv(const std::filesystem::path& path, PairKind kind);

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);
void write_labeled_tsv(const std::filesystem::path& path, std::span<const LabeledText> rows);
void write_pairs_tsv(const std::filesystem::path& path, std::span<const PairRecord> rows);

}  // namespace blab
