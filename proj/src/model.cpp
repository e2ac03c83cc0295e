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

#include "blab/model.hpp"

#include <algorithm>

namespace blab {

ClassifierHead ClassifierHead::init(std::vector<std::string> classes, std::size_t features, Rng& rng) {
  if (classes.empty()) throw ConfigError("classifier head needs at least one class");
  ClassifierHead h;
  h.weight = normal_param({features, classes.size()}, rng);
  h.bias = Param(Tensor({classes.size()}));
  h.classes = std::move(classes);
  return h;
}

int ClassifierHead::class_index(const std::string& label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) throw ConfigError("label '" + label + "' is not one of the declared classes");
  return static_cast<int>(it - classes.begin());
}

Autobot Autobot::assemble(ModelConfig config, Vocabulary vocab, EncoderParams encoder, std::uint64_t seed) {
  config.encoder.vocab_size = vocab.size();
  config.validate();
  Autobot m;
  m.config = config;
  m.vocab = std::move(vocab);
  m.encoder = std::move(encoder);
  Rng rng = Rng(seed).derive(0xb077ULL);
  m.bottleneck = BottleneckParams::init(config.encoder.d_model, config.bottleneck_heads, rng);
  m.decoder = DecoderParams::init(config, m.encoder.tok_emb.value, rng);
  return m;
}

Autobot Autobot::initialize(ModelConfig config, Vocabulary vocab, std::uint64_t seed) {
  config.encoder.vocab_size = vocab.size();
  EncoderParams enc = initial_encoder(config.encoder, seed);
  return assemble(std::move(config), std::move(vocab), std::move(enc), seed);
}

std::vector<int> Autobot::encode_text(std::string_view text) const {
  return encode(vocab, text, config.encoder.max_len);
}

std::vector<int> Autobot::target_ids(std::string_view text) const {
  std::vector<int> ids = encode_text(text);
  return std::vector<int>(ids.begin() + 1, ids.end() - 1);
}

Tensor sentence_vectors(const Autobot& model, std::span<const std::string> texts, PoolingMode mode) {
  if (texts.empty()) throw NumericError("sentence_vectors: no texts");
  std::vector<std::vector<int>> ids;
  for (const auto& t : texts) ids.push_back(model.encode_text(t));
  Graph g(Precision::f32);
  const EncoderVars enc = bind_encoder(g, model.encoder);
  const BottleneckVars bott = bind_bottleneck(g, model.bottleneck, false);
  const EncoderOutput h = encoder_forward(enc, model.config.encoder, make_batch(ids), false, nullptr);
  const Var z = sentence_representation(h, mode, &bott);
  Tensor out = z.value();
  out.reshape({texts.size(), model.config.encoder.d_model});
  return out;
}

Tensor sentence_vector(const Autobot& model, std::string_view text, PoolingMode mode) {
  const std::string s(text);
  Tensor z = sentence_vectors(model, std::span<const std::string>(&s, 1), mode);
  z.reshape({model.config.encoder.d_model});
  return z;
}

bool same_parameters(const Autobot& a, const Autobot& b) {
  std::vector<std::pair<std::string, const Tensor*>> lhs, rhs;
  Autobot::each(a, [&](const std::string& n, const Param& p) { lhs.emplace_back(n, &p.value); });
  Autobot::each(b, [&](const std::string& n, const Param& p) { rhs.emplace_back(n, &p.value); });
  if (lhs.size() != rhs.size()) return false;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i].first != rhs[i].first || !(*lhs[i].second == *rhs[i].second)) return false;
  }
  return true;
}

}  // namespace blab
