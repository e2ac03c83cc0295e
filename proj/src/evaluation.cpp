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

#include "blab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "blab/generation.hpp"
#include "blab/parallel.hpp"
#include "blab/training.hpp"

namespace blab {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(10) << x;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double reference_score(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::mean: return 80.78;
    case PoolingMode::max: return 78.76;
    case PoolingMode::cls: return 79.67;
    case PoolingMode::bottleneck: return 81.88;
  }
  return 0.0;
}

}  // namespace

double corpus_bleu(std::span<const std::string> candidates, std::span<const std::string> references,
                   const BleuConfig& cfg) {
  if (cfg.max_n < 1 || cfg.max_n > 4) throw MetricError("bleu: max_n must lie in [1, 4]");
  if (candidates.size() != references.size()) {
    throw MetricError("bleu: " + std::to_string(candidates.size()) + " candidates for " +
                      std::to_string(references.size()) + " references");
  }
  if (candidates.empty()) throw MetricError("bleu: no sentence pairs");
  if (cfg.smoothing == BleuSmoothing::add_epsilon && !(cfg.epsilon > 0.0)) {
    throw MetricError("bleu: epsilon must be positive");
  }

  const auto max_n = static_cast<std::size_t>(cfg.max_n);
  std::vector<double> matches(max_n, 0.0);
  std::vector<double> totals(max_n, 0.0);
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto cand = tokenize(candidates[i]);
    const auto ref = tokenize(references[i]);
    cand_len += static_cast<double>(cand.size());
    ref_len += static_cast<double>(ref.size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cc = ngram_counts(cand, n);
      const auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : cc) {
        auto it = rc.find(gram);
        if (it != rc.end()) matches[n - 1] += static_cast<double>(std::min(count, it->second));
      }
      if (cand.size() >= n) totals[n - 1] += static_cast<double>(cand.size() - n + 1);
    }
  }
  if (cand_len == 0.0) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    double m = matches[n];
    if (m == 0.0) {
      if (cfg.smoothing == BleuSmoothing::none) return 0.0;
      m = cfg.epsilon;
    }
    const double t = totals[n] > 0.0 ? totals[n] : 1.0;
    log_sum += std::log(m / t);
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw MetricError("spearman: inputs differ in length");
  if (xs.size() < 2) throw MetricError("spearman: need at least two observations");
  for (double v : xs) {
    if (!std::isfinite(v)) throw MetricError("spearman: non-finite input");
  }
  for (double v : ys) {
    if (!std::isfinite(v)) throw MetricError("spearman: non-finite input");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double mx = mean_of(rx);
  const double my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw MetricError("spearman: undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw MetricError("cosine: vectors differ in length");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw MetricError("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double token_accuracy(std::span<const int> predicted, std::span<const int> target) {
  const std::size_t longest = std::max(predicted.size(), target.size());
  if (longest == 0) return 1.0;
  const std::size_t shortest = std::min(predicted.size(), target.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < shortest; ++i) hits += predicted[i] == target[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(longest);
}

int exact_match(std::span<const int> predicted, std::span<const int> target) {
  return std::equal(predicted.begin(), predicted.end(), target.begin(), target.end()) ? 1 : 0;
}

// ---------------------------------------------------------------------------

std::vector<double> BowClassifier::scores(std::string_view text) const {
  const std::size_t width = vocab.size() + 1;
  std::vector<double> x(width, 0.0);
  for (const auto& tok : tokenize(text)) x[static_cast<std::size_t>(vocab.id(tok))] += 1.0;
  x[width - 1] = 1.0;
  std::vector<double> out(classes.size(), 0.0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t j = 0; j < width; ++j) out[c] += weight(c, j) * x[j];
  }
  return out;
}

std::string BowClassifier::predict(std::string_view text) const {
  const auto s = scores(text);
  return classes[static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())];
}

double BowClassifier::accuracy(std::span<const LabeledText> data) const {
  if (data.empty()) throw MetricError("classifier accuracy: no data");
  std::size_t hits = 0;
  for (const auto& row : data) hits += predict(row.text) == row.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

BowClassifier train_transfer_classifier(std::span<const LabeledText> data, std::size_t epochs, double lr,
                                        BowTrainLog* log) {
  std::set<std::string> distinct;
  std::vector<std::string> texts;
  for (const auto& row : data) {
    distinct.insert(row.label);
    texts.push_back(row.text);
  }
  if (distinct.size() < 2) throw MetricError("transfer classifier: need at least two classes");
  if (!(lr > 0.0)) throw MetricError("transfer classifier: lr must be positive");

  BowClassifier clf;
  clf.classes.assign(distinct.begin(), distinct.end());
  clf.vocab = build_vocab(texts, 1);
  clf.trained_on = std::to_string(data.size()) + " labelled sentences";
  const std::size_t width = clf.vocab.size() + 1;
  const std::size_t n_classes = clf.classes.size();
  clf.weight = Tensor({n_classes, width});

  std::vector<std::vector<double>> features;
  std::vector<std::size_t> labels;
  for (const auto& row : data) {
    std::vector<double> x(width, 0.0);
    for (const auto& tok : tokenize(row.text)) x[static_cast<std::size_t>(clf.vocab.id(tok))] += 1.0;
    x[width - 1] = 1.0;
    features.push_back(std::move(x));
    labels.push_back(static_cast<std::size_t>(
        std::find(clf.classes.begin(), clf.classes.end(), row.label) - clf.classes.begin()));
  }

  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Tensor grad({n_classes, width});
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      std::vector<double> logit(n_classes, 0.0);
      for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t j = 0; j < width; ++j) logit[c] += clf.weight(c, j) * features[i][j];
      }
      const double top = *std::max_element(logit.begin(), logit.end());
      double z = 0.0;
      for (double l : logit) z += std::exp(l - top);
      loss -= (logit[labels[i]] - top - std::log(z)) * inv_n;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double p = std::exp(logit[c] - top) / z - (c == labels[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < width; ++j) grad(c, j) += p * features[i][j] * inv_n;
      }
    }
    if (log != nullptr) log->loss.push_back(loss);
    for (std::size_t k = 0; k < grad.size(); ++k) clf.weight[k] -= lr * grad[k];
  }
  return clf;
}

// ---------------------------------------------------------------------------

std::vector<double> pair_cosines(const Autobot& model, std::span<const PairRecord> pairs, PoolingMode mode) {
  if (pairs.empty()) return {};
  std::vector<std::string> texts(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    texts[i] = pairs[i].first;
    texts[pairs.size() + i] = pairs[i].second;
  }
  const Tensor z = sentence_vectors(model, texts, mode);
  const std::size_t d = z.cols();
  const auto row = [&](std::size_t r) { return std::span<const double>(z.values()).subspan(r * d, d); };
  std::vector<double> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) out.push_back(cosine(row(i), row(pairs.size() + i)));
  return out;
}

double sts_eval(const Autobot& model, std::span<const PairRecord> pairs, PoolingMode mode) {
  if (pairs.size() < 2) throw MetricError("sts_eval: need at least two pairs");
  std::vector<double> gold;
  for (const auto& p : pairs) {
    if (!p.score) throw MetricError("sts_eval: pair without a gold score");
    gold.push_back(*p.score);
  }
  return spearman(pair_cosines(model, pairs, mode), gold);
}

ReconstructionScore reconstruction_score(const Autobot& model, std::span<const std::string> texts) {
  ReconstructionScore s;
  if (texts.empty()) return s;
  const Tensor zs = sentence_vectors(model, texts);
  const std::size_t d = zs.cols();
  std::vector<double> acc(texts.size());
  std::vector<int> exact(texts.size());
  parallel_for(texts.size(), [&](std::size_t i) {
    Tensor z({d});
    for (std::size_t c = 0; c < d; ++c) z[c] = zs(i, c);
    std::vector<int> pred = greedy_decode(model, z);
    if (!pred.empty() && pred.back() == kEos) pred.pop_back();
    const std::vector<int> target = model.target_ids(texts[i]);
    acc[i] = token_accuracy(pred, target);
    exact[i] = exact_match(pred, target);
  });
  s.sentences = texts.size();
  s.token_accuracy = mean_of(acc);
  s.exact_match = static_cast<double>(std::accumulate(exact.begin(), exact.end(), 0)) /
                  static_cast<double>(texts.size());
  return s;
}

// ---------------------------------------------------------------------------

void Report::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw MetricError("report: row has " + std::to_string(row.size()) + " cells for " +
                      std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

std::string Report::csv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << csv_field(columns[c]);
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out << format_double(v);
            } else if constexpr (std::is_same_v<T, long long>) {
              out << v;
            } else {
              out << csv_field(v);
            }
          },
          row[c]);
    }
    out << '\n';
  }
  return out.str();
}

std::string Report::json() const {
  nlohmann::ordered_json doc;
  doc["columns"] = columns;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json obj;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::visit([&](const auto& v) { obj[columns[c]] = v; }, row[c]);
    }
    doc["rows"].push_back(std::move(obj));
  }
  doc["notes"] = notes;
  return doc.dump(2) + "\n";
}

void Report::write(const std::filesystem::path& csv_path) const {
  const auto put = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
  };
  put(csv_path, csv());
  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  put(json_path, json());
}

std::vector<PoolingAblationRow> pooling_ablation(const Autobot& model, std::span<const PairRecord> finetune_pairs,
                                                 std::span<const PairRecord> eval_pairs, const FinetuneConfig& cfg) {
  std::set<std::string> distinct;
  for (const auto& p : finetune_pairs) distinct.insert(p.label);
  const std::vector<std::string> classes(distinct.begin(), distinct.end());
  std::vector<PoolingAblationRow> rows;
  for (PoolingMode mode : {PoolingMode::mean, PoolingMode::max, PoolingMode::cls, PoolingMode::bottleneck}) {
    const FinetuneResult r = siamese_finetune(model, finetune_pairs, classes, cfg, mode);
    rows.push_back({mode, sts_eval(r.model, eval_pairs, mode), r.train_accuracy});
  }
  return rows;
}

Report pooling_report(std::span<const PoolingAblationRow> rows) {
  Report rep;
  rep.columns = {"pooling", "spearman", "train_accuracy", "reference_full_scale"};
  double beta = 0.0, cls = 0.0;
  bool have_beta = false, have_cls = false;
  for (const auto& r : rows) {
    rep.add_row({std::string(pooling_name(r.mode)), r.spearman, r.train_accuracy, reference_score(r.mode)});
    if (r.mode == PoolingMode::bottleneck) {
      beta = r.spearman;
      have_beta = true;
    }
    if (r.mode == PoolingMode::cls) {
      cls = r.spearman;
      have_cls = true;
    }
  }
  rep.notes.push_back(
      "reference_full_scale: published STS-B Spearman x100 at full scale (RoBERTa-base, SNLI+MNLI); "
      "not reproducible at this scale");
  if (have_beta && have_cls) {
    rep.notes.push_back(std::string("beta >= cls on this run: ") + (beta >= cls ? "yes" : "no"));
  }
  return rep;
}

}  // namespace blab
