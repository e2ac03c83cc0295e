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

#include "blab/bottleneck.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "blab/decoder.hpp"

namespace blab {

BottleneckParams BottleneckParams::init(std::size_t d, std::size_t n_heads, Rng& rng) {
  if (n_heads == 0 || d % n_heads != 0) throw ConfigError("bottleneck heads must divide d_model");
  BottleneckParams p;
  p.wq = normal_param({d, d}, rng);
  p.wk = normal_param({d, d}, rng);
  p.wv = normal_param({d, d}, rng);
  p.n_heads = n_heads;
  return p;
}

ShapeList BottleneckParams::shapes(std::size_t d, const std::string& prefix) {
  return {{prefix + "wq", {d, d}}, {prefix + "wk", {d, d}}, {prefix + "wv", {d, d}}};
}

Var bottleneck_forward(const BottleneckVars& vars, const EncoderOutput& h, std::vector<Var>* head_weights) {
  const std::size_t d = h.hidden.cols();
  if (vars.n_heads == 0 || d % vars.n_heads != 0) throw NumericError("bottleneck: heads must divide d_model");
  if (h.rows == 0 || h.seq_len == 0) throw NumericError("bottleneck: empty encoder output");
  const std::size_t d_head = d / vars.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

  for (std::size_t b = 0; b < h.rows; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < h.seq_len; ++t) any = any || h.mask[b * h.seq_len + t] != 0;
    if (!any) throw NumericError("bottleneck: batch row " + std::to_string(b) + " is entirely padding");
  }

  std::vector<int> cls_rows(h.rows);
  for (std::size_t b = 0; b < h.rows; ++b) cls_rows[b] = static_cast<int>(b * h.seq_len);
  const Var queries = matmul(gather_rows(h.hidden, cls_rows), vars.wq);  // [rows x d]
  const Var keys = matmul(h.hidden, vars.wk);
  const Var values = matmul(h.hidden, vars.wv);

  std::vector<Var> sentence_vectors;
  for (std::size_t b = 0; b < h.rows; ++b) {
    const Var qb = slice_rows(queries, b, 1);
    const Var kb = slice_rows(keys, b * h.seq_len, h.seq_len);
    const Var vb = slice_rows(values, b * h.seq_len, h.seq_len);
    const auto mask = std::span<const std::uint8_t>(h.mask).subspan(b * h.seq_len, h.seq_len);
    std::vector<Var> heads;
    for (std::size_t i = 0; i < vars.n_heads; ++i) {
      const Var qh = slice_cols(qb, i * d_head, d_head);
      const Var kh = slice_cols(kb, i * d_head, d_head);
      const Var vh = slice_cols(vb, i * d_head, d_head);
      const Var weights = masked_softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), mask, false);
      if (head_weights != nullptr) head_weights->push_back(weights);
      heads.push_back(matmul(weights, vh));
    }
    sentence_vectors.push_back(heads.size() == 1 ? heads[0] : concat_cols(heads));
  }
  return sentence_vectors.size() == 1 ? sentence_vectors[0] : concat_rows(sentence_vectors);
}

const char* pooling_name(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::mean: return "mean";
    case PoolingMode::max: return "max";
    case PoolingMode::cls: return "cls";
    case PoolingMode::bottleneck: return "beta";
  }
  return "?";
}

PoolingMode parse_pooling(const std::string& name) {
  if (name == "mean") return PoolingMode::mean;
  if (name == "max") return PoolingMode::max;
  if (name == "cls") return PoolingMode::cls;
  if (name == "beta" || name == "bottleneck") return PoolingMode::bottleneck;
  throw ConfigError("unknown pooling mode '" + name + "' (expected mean, max, cls or beta)");
}

Var pool(const EncoderOutput& h, PoolingMode mode) {
  if (mode == PoolingMode::bottleneck) throw NumericError("pool: the bottleneck needs its parameters");
  std::vector<Var> rows;
  for (std::size_t b = 0; b < h.rows; ++b) {
    if (mode == PoolingMode::cls) {
      rows.push_back(slice_rows(h.hidden, b * h.seq_len, 1));
      continue;
    }
    std::vector<int> valid;
    for (std::size_t t = 0; t < h.seq_len; ++t) {
      if (h.mask[b * h.seq_len + t]) valid.push_back(static_cast<int>(b * h.seq_len + t));
    }
    if (valid.empty()) throw NumericError("pool: batch row " + std::to_string(b) + " is entirely padding");
    const Var picked = gather_rows(h.hidden, valid);
    rows.push_back(mode == PoolingMode::mean ? mean_rows(picked) : max_rows(picked));
  }
  return rows.size() == 1 ? rows[0] : concat_rows(rows);
}

Var sentence_representation(const EncoderOutput& h, PoolingMode mode, const BottleneckVars* bottleneck) {
  if (mode != PoolingMode::bottleneck) return pool(h, mode);
  if (bottleneck == nullptr) throw NumericError("sentence_representation: bottleneck parameters missing");
  return bottleneck_forward(*bottleneck, h);
}

ModelConfig published_base_config() {
  ModelConfig cfg;
  cfg.encoder.vocab_size = 50265;
  cfg.encoder.d_model = 768;
  cfg.encoder.n_layers = 12;
  cfg.encoder.n_heads = 12;
  cfg.encoder.ffn_mult = 4;
  cfg.encoder.max_len = 128;
  cfg.encoder.dropout = 0.1;
  cfg.bottleneck_heads = 12;
  cfg.decoder_layers = 1;
  return cfg;
}

ParamCountReport count_added_params(const ModelConfig& cfg) {
  cfg.validate();
  ParamCountReport r;
  r.config = cfg;
  r.encoder = count_values(EncoderParams::shapes(cfg.encoder));
  r.bottleneck = count_values(BottleneckParams::shapes(cfg.encoder.d_model));
  const ShapeList decoder = DecoderParams::shapes(cfg);
  r.decoder = count_values(decoder);
  r.decoder_embeddings = (cfg.encoder.vocab_size + cfg.encoder.max_len) * cfg.encoder.d_model;
  r.overhead_ratio = static_cast<double>(r.bottleneck + r.decoder) / static_cast<double>(r.encoder);
  return r;
}

namespace {

std::string millions(std::size_t n) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << static_cast<double>(n) / 1e6 << "M";
  return os.str();
}

std::string percent(double ratio) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << ratio * 100.0 << "%";
  return os.str();
}

}  // namespace

std::string ParamCountReport::render() const {
  const auto& e = config.encoder;
  const std::size_t d = e.d_model;
  const std::size_t per_head = e.d_model / config.bottleneck_heads;
  const std::size_t decoder_layers_only = decoder - decoder_embeddings;
  const double enc = static_cast<double>(encoder);

  std::ostringstream os;
  os << "parameter report\n";
  os << "config: d_model=" << d << " n_layers=" << e.n_layers << " n_heads=" << e.n_heads
     << " vocab_size=" << e.vocab_size << " max_len=" << e.max_len << " ffn_mult=" << e.ffn_mult
     << " bottleneck_heads=" << config.bottleneck_heads << " decoder_layers=" << config.decoder_layers << "\n";
  os << "encoder_params=" << encoder << " (" << millions(encoder) << ")\n";
  os << "bottleneck_params=" << bottleneck << " (= 3*d_model^2 = 3*" << d << "^2)\n";
  os << "decoder_params=" << decoder << " (" << millions(decoder) << ")\n";
  os << "  decoder_embedding_params=" << decoder_embeddings << " (token + position tables)\n";
  os << "  decoder_layer_params=" << decoder_layers_only << "\n";
  os << "overhead_ratio=" << std::setprecision(6) << overhead_ratio << " (" << percent(overhead_ratio)
     << ", (bottleneck + decoder) / encoder)\n";
  os << "overhead_without_decoder_embeddings=" << percent(static_cast<double>(bottleneck + decoder_layers_only) / enc)
     << "\n";
  os << "overhead_bottleneck_only=" << percent(static_cast<double>(bottleneck) / enc) << "\n";
  os << "reference (published, full scale): trained model 127M vs 125M base encoder (~2M added, 1.6% overhead); "
        "bottleneck stated as 3d^2 with d the per-head width (d=64)\n";
  os << "reference_literal_3d2=" << 3 * per_head * per_head << " (3*" << per_head << "^2 at this config)\n";
  os << "discrepancy: the literal per-head 3d^2 is far below the full " << d << "x" << d
     << " query/key/value projections counted here, and a complete decoder layer plus its own embedding table "
        "adds far more than ~2M. The published ~2M / 1.6% is closest to the bottleneck projections alone ("
     << percent(static_cast<double>(bottleneck) / enc)
     << " here); which tensors the published figure counts is not specified, so agreement is not asserted.\n";
  return os.str();
}

}  // namespace blab
