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

#include "blab/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace blab {

namespace {

const std::array<const char*, kNumReserved> kReservedTokens = {
    "<pad>", "<cls>", "<sep>", "<mask>", "<unk>", "<bos>", "<eos>"};

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumReserved; ++i) {
    tokens_.emplace_back(kReservedTokens[static_cast<std::size_t>(i)]);
    index_.emplace(tokens_.back(), i);
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < static_cast<std::size_t>(kNumReserved)) {
    throw TextError("vocabulary needs the " + std::to_string(kNumReserved) + " reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kReservedTokens[static_cast<std::size_t>(i)]) {
      throw TextError("vocabulary id " + std::to_string(i) + " must be " +
                      kReservedTokens[static_cast<std::size_t>(i)]);
    }
  }
  Vocabulary v;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw TextError("duplicate vocabulary token '" + tokens[i] + "'");
    }
    v.tokens_.push_back(std::move(tokens[i]));
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw TextError("token id " + std::to_string(id) + " outside vocabulary of " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary build_vocab(std::span<const std::string> corpus, int min_count) {
  if (min_count < 1) throw TextError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& tok : tokenize(line)) ++counts[tok];
  }
  Vocabulary reserved;
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= static_cast<std::size_t>(min_count) && !reserved.contains(tok)) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = reserved.tokens();
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<int> encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len) {
  if (max_len < 3) throw TextError("encode: max_len must be >= 3");
  std::vector<int> ids{kCls};
  for (const auto& tok : tokenize(text)) {
    if (ids.size() + 1 >= max_len) break;
    ids.push_back(vocab.id(tok));
  }
  ids.push_back(kSep);
  return ids;
}

std::string decode(const Vocabulary& vocab, std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    const std::string& tok = vocab.token(id);
    if (Vocabulary::is_reserved(id)) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::vector<int> content_ids(const Vocabulary& vocab, std::string_view text, std::size_t max_tokens) {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) {
    if (ids.size() >= max_tokens) break;
    ids.push_back(vocab.id(tok));
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Corruption

void CorruptionPolicy::validate() const {
  if (!(select_prob >= 0.0 && select_prob <= 1.0)) {
    throw TextError("corruption: select_prob must lie in [0, 1]");
  }
  if (mask_frac < 0.0 || random_frac < 0.0 || keep_frac < 0.0 ||
      std::fabs(mask_frac + random_frac + keep_frac - 1.0) > 1e-9) {
    throw TextError("corruption: mask/random/keep fractions must be non-negative and sum to 1");
  }
}

Corruption corrupt(std::span<const int> ids, const CorruptionPolicy& policy, const Vocabulary& vocab,
                   Rng& rng) {
  policy.validate();
  const std::size_t regular = vocab.size() - kNumReserved;
  if (regular == 0 && policy.random_frac > 0.0 && policy.select_prob > 0.0) {
    throw TextError("corrupt: random replacement needs at least one non-reserved token");
  }
  Corruption out;
  out.ids.assign(ids.begin(), ids.end());
  for (std::size_t i = 0; i < out.ids.size(); ++i) {
    if (Vocabulary::is_reserved(out.ids[i])) continue;
    if (rng.uniform() >= policy.select_prob) continue;
    out.selected.push_back(i);
    const double action = rng.uniform();
    if (action < policy.mask_frac) {
      out.ids[i] = kMask;
    } else if (action < policy.mask_frac + policy.random_frac) {
      out.ids[i] = kNumReserved + static_cast<int>(rng.below(regular));
    }
  }
  return out;
}

Batch make_batch(std::span<const std::vector<int>> sequences) {
  Batch b;
  b.rows = sequences.size();
  for (const auto& s : sequences) b.seq_len = std::max(b.seq_len, s.size());
  if (b.rows == 0 || b.seq_len == 0) throw TextError("make_batch: empty batch");
  b.ids.assign(b.rows * b.seq_len, kPad);
  b.mask.assign(b.rows * b.seq_len, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& s = sequences[r];
    for (std::size_t t = 0; t < s.size(); ++t) {
      b.ids[r * b.seq_len + t] = s[t];
      b.mask[r * b.seq_len + t] = s[t] == kPad ? 0 : 1;
    }
    b.lengths.push_back(s.size());
  }
  return b;
}

// ---------------------------------------------------------------------------
// Toy corpus

ToyCorpusSpec ToyCorpusSpec::desk_default() {
  ToyCorpusSpec s;
  s.determiners = {"the", "a", "this", "that"};
  s.subjects = {"food",  "service", "staff",  "pizza",  "burger", "coffee",  "waiter",    "place",
                "menu",  "pasta",   "soup",   "salad",  "owner",  "bar",     "room",      "music",
                "dessert", "steak", "bread",  "wine",   "price",  "table",   "chef",      "patio",
                "sushi", "tea",     "lobby",  "hotel",  "kitchen", "breakfast", "sandwich", "beer"};
  s.verbs = {"was", "is", "seemed", "looked", "felt", "tasted", "remained", "became", "appeared",
             "sounded"};
  s.adverbs = {"very",       "really", "quite", "so",      "truly",  "pretty", "extremely",
               "rather",     "incredibly", "super", "fairly", "totally", "always", "simply"};
  s.positive = {"good",    "great",     "excellent", "amazing", "delicious", "friendly", "wonderful",
                "fantastic", "lovely",  "perfect",   "fresh",   "tasty",     "awesome",  "superb",
                "pleasant", "nice",     "brilliant", "clean",   "cozy",      "charming", "helpful",
                "outstanding", "tender", "warm",     "generous", "splendid"};
  s.negative = {"bad",   "terrible", "awful",    "horrible", "rude",      "bland",  "disgusting",
                "poor",  "dirty",    "cold",     "stale",    "slow",      "nasty",  "mediocre",
                "greasy", "gross",   "dreadful", "boring",   "noisy",     "soggy",  "overpriced",
                "filthy", "burnt",   "awkward",  "sloppy",   "lousy"};
  return s;
}

void ToyCorpusSpec::validate() const {
  const std::pair<const char*, const std::vector<std::string>*> slots[] = {
      {"determiners", &determiners}, {"subjects", &subjects}, {"verbs", &verbs},
      {"adverbs", &adverbs},         {"positive", &positive}, {"negative", &negative}};
  for (const auto& [name, list] : slots) {
    if (list->empty()) throw TextError(std::string("toy corpus: slot list '") + name + "' is empty");
  }
  for (const auto& p : positive) {
    if (std::find(negative.begin(), negative.end(), p) != negative.end()) {
      throw TextError("toy corpus: adjective '" + p + "' is both positive and negative");
    }
  }
}

std::string ToySentence::render(const ToyCorpusSpec& spec) const {
  const auto& adjectives = positive_polarity ? spec.positive : spec.negative;
  return spec.determiners.at(choice[0]) + " " + spec.subjects.at(choice[1]) + " " +
         spec.verbs.at(choice[2]) + " " + spec.adverbs.at(choice[3]) + " " +
         adjectives.at(choice[4]);
}

std::size_t ToySentence::overlap(const ToySentence& other) const {
  std::size_t same = 0;
  for (std::size_t i = 0; i + 1 < kToySlots; ++i) same += choice[i] == other.choice[i] ? 1 : 0;
  if (positive_polarity == other.positive_polarity && choice[4] == other.choice[4]) ++same;
  return same;
}

ToySentence sample_toy_sentence(const ToyCorpusSpec& spec, Rng& rng) {
  ToySentence s;
  s.choice[0] = rng.below(spec.determiners.size());
  s.choice[1] = rng.below(spec.subjects.size());
  s.choice[2] = rng.below(spec.verbs.size());
  s.choice[3] = rng.below(spec.adverbs.size());
  s.positive_polarity = rng.below(2) == 0;
  s.choice[4] = rng.below(s.positive_polarity ? spec.positive.size() : spec.negative.size());
  return s;
}

std::vector<LabeledText> generate_toy_corpus(const ToyCorpusSpec& spec) {
  spec.validate();
  const Rng base(spec.seed);
  std::vector<LabeledText> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng = base.derive(i);
    const ToySentence s = sample_toy_sentence(spec, rng);
    out.push_back({s.positive_polarity ? "pos" : "neg", s.render(spec)});
  }
  return out;
}

std::vector<PairRecord> generate_toy_scored_pairs(const ToyCorpusSpec& spec, std::size_t count,
                                                  std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<PairRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const ToySentence a = sample_toy_sentence(spec, rng);
    ToySentence b = a;
    // Resample a random number of slots so overlap spans 0..5.
    const std::size_t changes = rng.below(kToySlots + 1);
    for (std::size_t c = 0; c < changes; ++c) {
      const std::size_t slot = rng.below(kToySlots);
      const ToySentence fresh = sample_toy_sentence(spec, rng);
      if (slot == 4) b.positive_polarity = fresh.positive_polarity;
      b.choice[slot] = fresh.choice[slot];
    }
    PairRecord r;
    r.score = static_cast<double>(a.overlap(b));
    r.label = std::to_string(a.overlap(b));
    r.first = a.render(spec);
    r.second = b.render(spec);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PairRecord> generate_toy_polarity_pairs(const ToyCorpusSpec& spec, std::size_t count,
                                                    std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<PairRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const ToySentence a = sample_toy_sentence(spec, rng);
    const ToySentence b = sample_toy_sentence(spec, rng);
    PairRecord r;
    r.label = a.positive_polarity == b.positive_polarity ? "same" : "different";
    r.first = a.render(spec);
    r.second = b.render(spec);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::string::size_type start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    cols.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cols;
}

std::optional<double> parse_decimal(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TextError("cannot open " + path.string());
  return in;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(std::move(line));
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<LabeledText> load_labeled_tsv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<LabeledText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2) {
      throw TextError(path.string() + ":" + std::to_string(line_no) + ": expected 2 tab-separated columns, found " +
                      std::to_string(cols.size()));
    }
    out.push_back({std::move(cols[0]), std::move(cols[1])});
  }
  return out;
}

std::vector<PairRecord> load_pairs_tsv(const std::filesystem::path& path, PairKind kind) {
  auto in = open_input(path);
  std::vector<PairRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (cols.size() != 3) {
      throw TextError(where + "expected 3 tab-separated columns, found " + std::to_string(cols.size()));
    }
    PairRecord r;
    r.score = parse_decimal(cols[0]);
    if (kind == PairKind::scored && !r.score) {
      throw TextError(where + "score '" + cols[0] + "' is not a decimal number");
    }
    r.label = std::move(cols[0]);
    r.first = std::move(cols[1]);
    r.second = std::move(cols[2]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path);
  if (!out) throw TextError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

void write_labeled_tsv(const std::filesystem::path& path, std::span<const LabeledText> rows) {
  std::ofstream out(path);
  if (!out) throw TextError("cannot write " + path.string());
  for (const auto& r : rows) out << r.label << '\t' << r.text << '\n';
}

void write_pairs_tsv(const std::filesystem::path& path, std::span<const PairRecord> rows) {
  std::ofstream out(path);
  if (!out) throw TextError("cannot write " + path.string());
  for (const auto& r : rows) out << r.label << '\t' << r.first << '\t' << r.second << '\n';
}

}  // namespace blab
