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

#include "blab/run_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "blab/generation.hpp"

namespace blab {

namespace {

using Json = nlohmann::ordered_json;

template <class T>
T convert(const std::string& key, const Json& j) {
  const auto bad = [&](const char* want) {
    return ConfigError("config key '" + key + "' expects " + want + ", got " + j.dump());
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) throw bad("a boolean");
    return j.get<bool>();
  } else if constexpr (std::is_same_v<T, double>) {
    if (!j.is_number()) throw bad("a number");
    return j.get<double>();
  } else if constexpr (std::is_same_v<T, int>) {
    if (!j.is_number_integer()) throw bad("an integer");
    return j.get<int>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) throw bad("a non-negative integer");
    return j.get<T>();
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    if (!j.is_array()) throw bad("an array of numbers");
    std::vector<double> out;
    for (const auto& x : j) out.push_back(convert<double>(key, x));
    return out;
  } else {
    static_assert(sizeof(T) == 0, "unsupported config type");
  }
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const Json&)> set;
  std::function<Json(const RunConfig&)> get;
};

#define BLAB_FIELD(name, member)                                                                        \
  Field {                                                                                               \
    name, [](RunConfig& c, const Json& j) { c.member = convert<std::decay_t<decltype(c.member)>>(name, j); }, \
        [](const RunConfig& c) { return Json(c.member); }                                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      BLAB_FIELD("seed", seed),
      BLAB_FIELD("model.d_model", model.encoder.d_model),
      BLAB_FIELD("model.n_layers", model.encoder.n_layers),
      BLAB_FIELD("model.n_heads", model.encoder.n_heads),
      BLAB_FIELD("model.ffn_mult", model.encoder.ffn_mult),
      BLAB_FIELD("model.max_len", model.encoder.max_len),
      BLAB_FIELD("model.dropout", model.encoder.dropout),
      BLAB_FIELD("model.bottleneck_heads", model.bottleneck_heads),
      BLAB_FIELD("model.decoder_layers", model.decoder_layers),
      BLAB_FIELD("corpus.count", corpus_count),
      BLAB_FIELD("vocab.min_count", vocab_min_count),
      BLAB_FIELD("corruption.select_prob", corruption.select_prob),
      BLAB_FIELD("corruption.mask_frac", corruption.mask_frac),
      BLAB_FIELD("corruption.random_frac", corruption.random_frac),
      BLAB_FIELD("corruption.keep_frac", corruption.keep_frac),
      BLAB_FIELD("pretrain.steps", pretrain.steps),
      BLAB_FIELD("pretrain.peak_lr", pretrain.peak_lr),
      BLAB_FIELD("pretrain.warmup_steps", pretrain.warmup_steps),
      BLAB_FIELD("pretrain.batch_size", pretrain.batch_size),
      BLAB_FIELD("pretrain.log_every", pretrain.log_every),
      BLAB_FIELD("train.steps", train.steps),
      BLAB_FIELD("train.peak_lr", train.peak_lr),
      BLAB_FIELD("train.warmup_steps", train.warmup_steps),
      BLAB_FIELD("train.batch_size", train.batch_size),
      BLAB_FIELD("train.clip_norm", train.clip_norm),
      BLAB_FIELD("train.eval_every", train.eval_every),
      BLAB_FIELD("train.log_every", train.log_every),
      BLAB_FIELD("freeze.unfrozen_encoder_top_k", freeze.unfrozen_encoder_top_k),
      BLAB_FIELD("freeze.train_bottleneck", freeze.train_bottleneck),
      BLAB_FIELD("freeze.train_decoder", freeze.train_decoder),
      BLAB_FIELD("finetune.steps", finetune.steps),
      BLAB_FIELD("finetune.peak_lr", finetune.peak_lr),
      BLAB_FIELD("finetune.warmup_steps", finetune.warmup_steps),
      BLAB_FIELD("finetune.batch_size", finetune.batch_size),
      BLAB_FIELD("finetune.clip_norm", finetune.clip_norm),
      BLAB_FIELD("steer.max_per_class", steer_max_per_class),
      BLAB_FIELD("sweep.alphas", sweep_alphas),
      BLAB_FIELD("bleu.max_n", bleu.max_n),
      Field{"bleu.smoothing",
            [](RunConfig& c, const Json& j) {
              if (!j.is_string()) throw ConfigError("config key 'bleu.smoothing' expects \"none\" or \"add_epsilon\"");
              const auto s = j.get<std::string>();
              if (s == "none") {
                c.bleu.smoothing = BleuSmoothing::none;
              } else if (s == "add_epsilon") {
                c.bleu.smoothing = BleuSmoothing::add_epsilon;
              } else {
                throw ConfigError("config key 'bleu.smoothing' expects \"none\" or \"add_epsilon\", got \"" + s + "\"");
              }
            },
            [](const RunConfig& c) {
              return Json(c.bleu.smoothing == BleuSmoothing::none ? "none" : "add_epsilon");
            }},
      BLAB_FIELD("bleu.epsilon", bleu.epsilon),
      BLAB_FIELD("classifier.epochs", classifier_epochs),
      BLAB_FIELD("classifier.lr", classifier_lr),
  };
  return table;
}

#undef BLAB_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig::RunConfig() {
  model.bottleneck_heads = 16;
  train.peak_lr = 1e-2;
  sweep_alphas = default_alpha_grid();
  sync();
}

void RunConfig::sync() {
  pretrain.seed = seed;
  pretrain.corruption = corruption;
  train.seed = seed;
  train.corruption = corruption;
  finetune.seed = seed;
}

void RunConfig::validate() const {
  // vocab_size comes from the vocabulary at assembly time.
  ModelConfig shape = model;
  if (shape.encoder.vocab_size == 0) shape.encoder.vocab_size = kNumReserved;
  shape.validate();
  if (model.encoder.max_len < 3) throw ConfigError("model.max_len must be at least 3");
  if (corpus_count == 0) throw ConfigError("corpus.count must be positive");
  if (vocab_min_count < 1) throw ConfigError("vocab.min_count must be at least 1");
  corruption.validate();
  pretrain_config().validate();
  train_config().validate();
  freeze.validate(model.encoder.n_layers);
  finetune_config().validate();
  if (steer_max_per_class == 0) throw ConfigError("steer.max_per_class must be positive");
  if (sweep_alphas.empty()) throw ConfigError("sweep.alphas must not be empty");
  for (double a : sweep_alphas) {
    if (!std::isfinite(a)) throw ConfigError("sweep.alphas must be finite");
  }
  if (bleu.max_n < 1 || bleu.max_n > 4) throw ConfigError("bleu.max_n must lie in [1, 4]");
  if (!(bleu.epsilon > 0.0)) throw ConfigError("bleu.epsilon must be positive");
  if (classifier_epochs == 0) throw ConfigError("classifier.epochs must be positive");
  if (!(classifier_lr > 0.0)) throw ConfigError("classifier.lr must be positive");
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig c = pretrain;
  c.seed = seed;
  c.corruption = corruption;
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c = train;
  c.seed = seed;
  c.corruption = corruption;
  return c;
}

FinetuneConfig RunConfig::finetune_config() const {
  FinetuneConfig c = finetune;
  c.seed = seed;
  return c;
}

ToyCorpusSpec RunConfig::corpus_spec() const {
  ToyCorpusSpec spec = ToyCorpusSpec::desk_default();
  spec.count = corpus_count;
  spec.seed = seed;
  return spec;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_run_config_value(RunConfig& cfg, const std::string& key, std::string_view json_value) {
  const Field& f = find_field(key);
  Json j;
  try {
    j = Json::parse(json_value);
  } catch (const nlohmann::json::exception&) {
    j = Json(std::string(json_value));
  }
  f.set(cfg, j);
  cfg.sync();
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  set_run_config_value(cfg, std::string(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
  if (!doc.is_object()) throw ConfigError(path.string() + ": expected a JSON object of dotted keys");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) {
      throw ConfigError(path.string() + ": key '" + key + "' holds an object; use flat dotted keys");
    }
    find_field(key).set(cfg, value);
  }
  cfg.sync();
  return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
  Json doc = Json::object();
  for (const auto& f : fields()) doc[f.key] = f.get(cfg);
  return doc.dump(2) + "\n";
}

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "config.resolved.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << resolved_config_json(cfg);
}

}  // namespace blab
