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

#include "blab/generation.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "blab/parallel.hpp"

namespace blab {

namespace {

bool emittable(int id) {
  return id != kPad && id != kBos && id != kCls && id != kSep && id != kMask;
}

Tensor as_row(const Tensor& z, std::size_t d) {
  if (z.size() != d) {
    throw NumericError("sentence vector has " + std::to_string(z.size()) + " values, model width is " +
                       std::to_string(d));
  }
  Tensor row = z;
  row.reshape({1, d});
  return row;
}

double norm(const Tensor& t) {
  double s = 0.0;
  for (double x : t.values()) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<int> greedy_decode(const Autobot& model, const Tensor& z, std::size_t max_tokens) {
  const auto& e = model.config.encoder;
  const std::size_t cap = e.max_len - 1;
  const std::size_t limit = max_tokens == 0 ? cap : std::min(max_tokens, cap);

  Graph g(Precision::f32);
  const DecoderVars vars = bind_decoder(g, model.decoder);
  const Var zv = g.constant(as_row(z, e.d_model));

  std::vector<int> prefix{kBos};
  std::vector<int> out;
  while (out.size() < limit) {
    const std::vector<std::vector<int>> seqs{prefix};
    const Var logits = decoder_forward(vars, model.config, zv, make_batch(seqs), false, nullptr);
    const Tensor& lv = logits.value();
    const std::size_t last = lv.rows() - 1;
    int best = -1;
    double best_score = 0.0;
    for (std::size_t v = 0; v < lv.cols(); ++v) {
      const int id = static_cast<int>(v);
      if (!emittable(id)) continue;
      const double s = lv(last, v);
      if (best < 0 || s > best_score) {
        best = id;
        best_score = s;
      }
    }
    out.push_back(best);
    if (best == kEos) break;
    prefix.push_back(best);
  }
  return out;
}

std::string decode_vector(const Autobot& model, const Tensor& z) {
  const std::vector<int> ids = greedy_decode(model, z);
  return decode(model.vocab, ids);
}

std::string reconstruct(const Autobot& model, std::string_view text) {
  return decode_vector(model, sentence_vector(model, text));
}

SteeringVector compute_steering_vector(const Autobot& model, std::span<const std::string> pos,
                                       std::span<const std::string> neg, std::size_t max_per_class,
                                       std::string source) {
  if (pos.empty() || neg.empty()) throw ConfigError("steering vector needs sentences of both classes");
  if (max_per_class == 0) throw ConfigError("steering vector: max_per_class must be positive");
  const auto class_mean = [&](std::span<const std::string> texts) {
    const Tensor zs = sentence_vectors(model, texts.first(std::min(texts.size(), max_per_class)));
    Tensor m({zs.cols()});
    for (std::size_t r = 0; r < zs.rows(); ++r) {
      for (std::size_t c = 0; c < zs.cols(); ++c) m[c] += zs(r, c);
    }
    for (std::size_t c = 0; c < zs.cols(); ++c) m[c] /= static_cast<double>(zs.rows());
    return m;
  };
  SteeringVector sv;
  const Tensor mp = class_mean(pos);
  const Tensor mn = class_mean(neg);
  sv.v = Tensor({mp.size()});
  for (std::size_t c = 0; c < mp.size(); ++c) sv.v[c] = mp[c] - mn[c];
  sv.pos_count = std::min(pos.size(), max_per_class);
  sv.neg_count = std::min(neg.size(), max_per_class);
  sv.source = std::move(source);
  return sv;
}

Tensor shift(const Tensor& z, const Tensor& v, double alpha) {
  if (z.size() != v.size()) {
    throw NumericError("shift: vector sizes " + std::to_string(z.size()) + " and " + std::to_string(v.size()));
  }
  Tensor out = z;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i] + alpha * v[i];
  return out;
}

TransferResult transfer(const Autobot& model, std::string_view text, const SteeringVector& v, double alpha) {
  TransferResult r;
  r.alpha = alpha;
  r.input = std::string(text);
  const Tensor z = sentence_vector(model, text);
  r.z_shifted = shift(z, v.v, alpha);
  r.z_norm_before = norm(z);
  r.z_norm_after = norm(r.z_shifted);
  r.output = decode_vector(model, r.z_shifted);
  return r;
}

std::vector<std::string> interpolate(const Autobot& model, std::string_view a, std::string_view b,
                                     std::size_t steps) {
  if (steps < 2) throw ConfigError("interpolate: need at least two steps");
  return interpolate_vectors(model, sentence_vector(model, a), sentence_vector(model, b), steps);
}

std::vector<std::string> interpolate_vectors(const Autobot& model, const Tensor& za, const Tensor& zb,
                                             std::size_t steps) {
  if (steps < 2) throw ConfigError("interpolate: need at least two steps");
  if (za.size() != zb.size()) throw NumericError("interpolate: vectors differ in size");
  std::vector<std::string> out;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    Tensor z = za;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * za[i] + t * zb[i];
    out.push_back(decode_vector(model, z));
  }
  return out;
}

std::vector<SweepRow> alpha_sweep(const Autobot& model, std::span<const LabeledText> corpus, const SteeringVector& v,
                                  std::span<const double> alphas, const BowClassifier& classifier,
                                  const std::string& positive_label, const std::string& negative_label,
                                  const BleuConfig& bleu) {
  if (alphas.empty()) throw ConfigError("alpha_sweep: empty alpha grid");
  std::vector<std::string> inputs;
  std::vector<std::string> targets;
  std::vector<double> direction;
  for (const auto& row : corpus) {
    if (row.label == negative_label) {
      direction.push_back(1.0);
      targets.push_back(positive_label);
    } else if (row.label == positive_label) {
      direction.push_back(-1.0);
      targets.push_back(negative_label);
    } else {
      continue;
    }
    inputs.push_back(row.text);
  }
  if (inputs.empty()) throw ConfigError("alpha_sweep: no sentences labelled '" + positive_label + "' or '" +
                                        negative_label + "'");
  const Tensor zs = sentence_vectors(model, inputs);
  const std::size_t d = zs.cols();

  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    std::vector<std::string> outputs(inputs.size());
    parallel_for(inputs.size(), [&](std::size_t i) {
      Tensor z({d});
      for (std::size_t c = 0; c < d; ++c) z[c] = zs(i, c) + direction[i] * alpha * v.v[c];
      outputs[i] = decode_vector(model, z);
    });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (classifier.predict(outputs[i]) == targets[i]) ++hits;
    }
    SweepRow r;
    r.alpha = alpha;
    r.n = inputs.size();
    r.accuracy = static_cast<double>(hits) / static_cast<double>(inputs.size());
    r.self_bleu = self_bleu(outputs, inputs, bleu);
    rows.push_back(r);
  }
  return rows;
}

Report sweep_report(std::span<const SweepRow> rows) {
  Report rep;
  rep.columns = {"alpha", "accuracy", "self_bleu", "n"};
  for (const auto& r : rows) {
    rep.add_row({r.alpha, r.accuracy, r.self_bleu, static_cast<long long>(r.n)});
  }
  return rep;
}

void save_steering_vectors(const std::filesystem::path& path, const std::map<std::string, SteeringVector>& vectors) {
  nlohmann::json doc;
  doc["format"] = "blab-steering-v1";
  doc["vectors"] = nlohmann::json::object();
  for (const auto& [name, sv] : vectors) {
    doc["vectors"][name] = {{"values", std::vector<double>(sv.v.values().begin(), sv.v.values().end())},
                            {"pos_count", sv.pos_count},
                            {"neg_count", sv.neg_count},
                            {"source", sv.source}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

std::map<std::string, SteeringVector> load_steering_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error(path.string() + ": " + ex.what());
  }
  if (doc.value("format", "") != "blab-steering-v1" || !doc.contains("vectors")) {
    throw std::runtime_error(path.string() + ": not a steering vector file");
  }
  std::map<std::string, SteeringVector> out;
  for (const auto& [name, entry] : doc["vectors"].items()) {
    SteeringVector sv;
    auto values = entry.at("values").get<std::vector<double>>();
    if (values.empty()) throw std::runtime_error(path.string() + ": vector '" + name + "' is empty");
    const std::size_t n = values.size();
    sv.v = Tensor({n}, std::move(values));
    sv.pos_count = entry.value("pos_count", std::size_t{0});
    sv.neg_count = entry.value("neg_count", std::size_t{0});
    sv.source = entry.value("source", std::string{});
    out.emplace(name, std::move(sv));
  }
  return out;
}

}  // namespace blab
