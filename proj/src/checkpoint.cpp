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

#include "blab/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace blab {

namespace {

using Json = nlohmann::ordered_json;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, double x) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

Json config_json(const Autobot& m) {
  const auto& e = m.config.encoder;
  Json c;
  c["vocab_size"] = e.vocab_size;
  c["d_model"] = e.d_model;
  c["n_layers"] = e.n_layers;
  c["n_heads"] = e.n_heads;
  c["ffn_mult"] = e.ffn_mult;
  c["max_len"] = e.max_len;
  c["dropout"] = e.dropout;
  c["bottleneck_heads"] = m.config.bottleneck_heads;
  c["decoder_layers"] = m.config.decoder_layers;
  c["head_classes"] = m.head ? m.head->classes : std::vector<std::string>{};
  return c;
}

[[noreturn]] void fail(CheckpointErrorKind kind, const std::string& source, const std::string& detail) {
  throw CheckpointError(kind, source + ": " + detail);
}

}  // namespace

const char* checkpoint_error_name(CheckpointErrorKind kind) {
  switch (kind) {
    case CheckpointErrorKind::io: return "io error";
    case CheckpointErrorKind::bad_magic: return "bad magic";
    case CheckpointErrorKind::truncated: return "truncated file";
    case CheckpointErrorKind::bad_header: return "bad header";
    case CheckpointErrorKind::length_mismatch: return "length mismatch";
    case CheckpointErrorKind::out_of_bounds: return "tensor out of bounds";
    case CheckpointErrorKind::overlap: return "overlapping tensors";
    case CheckpointErrorKind::missing_tensor: return "missing tensor";
    case CheckpointErrorKind::unexpected_tensor: return "unexpected tensor";
  }
  return "checkpoint error";
}

CheckpointError::CheckpointError(CheckpointErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(checkpoint_error_name(kind)) + ": " + detail), kind_(kind) {}

std::string serialize_checkpoint(const Autobot& model) {
  Json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["config"] = config_json(model);
  header["vocab"] = model.vocab.tokens();
  Json index = Json::array();
  std::string data;
  Autobot::each(model, [&](const std::string& name, const Param& p) {
    const std::size_t offset = data.size();
    for (double x : p.value.values()) put_f32(data, x);
    index.push_back({{"name", name}, {"shape", p.value.shape()}, {"byte_offset", offset},
                     {"byte_len", data.size() - offset}});
  });
  header["tensor_index"] = std::move(index);
  const std::string text = header.dump();

  std::string out(kCheckpointMagic);
  put_u64(out, text.size());
  out += text;
  out += data;
  return out;
}

Autobot parse_checkpoint(std::string_view bytes, const std::string& source) {
  if (bytes.size() < kCheckpointMagic.size()) fail(CheckpointErrorKind::truncated, source, "shorter than the magic");
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    fail(CheckpointErrorKind::bad_magic, source, "file does not start with ABOT0001");
  }
  if (bytes.size() < 16) fail(CheckpointErrorKind::truncated, source, "header length field is cut off");
  const std::uint64_t header_len = get_u64(bytes.substr(8, 8));
  if (header_len > bytes.size() - 16) {
    fail(CheckpointErrorKind::truncated, source,
         "header claims " + std::to_string(header_len) + " bytes, " + std::to_string(bytes.size() - 16) +
             " remain");
  }
  const std::string_view data = bytes.substr(16 + header_len);

  Json header;
  ModelConfig cfg;
  std::vector<std::string> tokens;
  std::vector<std::string> head_classes;
  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;
    std::uint64_t len = 0;
  };
  std::vector<Entry> entries;
  try {
    header = Json::parse(bytes.substr(16, header_len));
    if (header.at("format_version").get<int>() != kCheckpointFormatVersion) {
      fail(CheckpointErrorKind::bad_header, source,
           "unsupported format_version " + header.at("format_version").dump());
    }
    const auto& c = header.at("config");
    cfg.encoder.vocab_size = c.at("vocab_size").get<std::size_t>();
    cfg.encoder.d_model = c.at("d_model").get<std::size_t>();
    cfg.encoder.n_layers = c.at("n_layers").get<std::size_t>();
    cfg.encoder.n_heads = c.at("n_heads").get<std::size_t>();
    cfg.encoder.ffn_mult = c.at("ffn_mult").get<std::size_t>();
    cfg.encoder.max_len = c.at("max_len").get<std::size_t>();
    cfg.encoder.dropout = c.at("dropout").get<double>();
    cfg.bottleneck_heads = c.at("bottleneck_heads").get<std::size_t>();
    cfg.decoder_layers = c.at("decoder_layers").get<std::size_t>();
    head_classes = c.value("head_classes", std::vector<std::string>{});
    tokens = header.at("vocab").get<std::vector<std::string>>();
    for (const auto& t : header.at("tensor_index")) {
      entries.push_back({t.at("name").get<std::string>(), t.at("shape").get<Shape>(),
                         t.at("byte_offset").get<std::uint64_t>(), t.at("byte_len").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(CheckpointErrorKind::bad_header, source, ex.what());
  }

  std::map<std::string, const Entry*> by_name;
  for (const auto& e : entries) {
    if (!by_name.emplace(e.name, &e).second) {
      fail(CheckpointErrorKind::bad_header, source, "tensor '" + e.name + "' listed twice");
    }
    if (e.shape.empty() || shape_size(e.shape) * 4 != e.len) {
      fail(CheckpointErrorKind::length_mismatch, source,
           "tensor '" + e.name + "' has shape " + shape_string(e.shape) + " but byte_len " + std::to_string(e.len));
    }
    if (e.offset > data.size() || e.len > data.size() - e.offset) {
      fail(CheckpointErrorKind::out_of_bounds, source,
           "tensor '" + e.name + "' spans bytes [" + std::to_string(e.offset) + ", " +
               std::to_string(e.offset + e.len) + ") of a " + std::to_string(data.size()) + "-byte data section");
    }
  }
  std::vector<const Entry*> sorted;
  for (const auto& e : entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const Entry* a, const Entry* b) { return a->offset < b->offset; });
  std::uint64_t covered = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i]->offset < sorted[i - 1]->offset + sorted[i - 1]->len) {
      fail(CheckpointErrorKind::overlap, source,
           "tensors '" + sorted[i - 1]->name + "' and '" + sorted[i]->name + "' share bytes");
    }
    covered += sorted[i]->len;
  }
  if (covered != data.size()) {
    fail(CheckpointErrorKind::length_mismatch, source,
         "data section has " + std::to_string(data.size()) + " bytes, index covers " + std::to_string(covered));
  }

  Autobot m;
  try {
    m.config = cfg;
    m.config.validate();
    m.vocab = Vocabulary::from_tokens(tokens);
    if (m.vocab.size() != cfg.encoder.vocab_size) {
      fail(CheckpointErrorKind::bad_header, source, "vocab has " + std::to_string(m.vocab.size()) +
                                                        " tokens, config says " + std::to_string(cfg.encoder.vocab_size));
    }
    m.encoder.layers.resize(cfg.encoder.n_layers);
    m.decoder.layers.resize(cfg.decoder_layers);
    m.bottleneck.n_heads = cfg.bottleneck_heads;
    if (!head_classes.empty()) {
      m.head = ClassifierHead{};
      m.head->classes = head_classes;
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& ex) {
    fail(CheckpointErrorKind::bad_header, source, ex.what());
  }

  ShapeList expected = EncoderParams::shapes(cfg.encoder);
  for (auto& s : BottleneckParams::shapes(cfg.encoder.d_model)) expected.push_back(std::move(s));
  for (auto& s : DecoderParams::shapes(cfg)) expected.push_back(std::move(s));
  std::map<std::string, Shape> expected_shape;
  for (const auto& s : expected) expected_shape[s.name] = s.shape;

  std::size_t used = 0;
  Autobot::each(m, [&](const std::string& name, Param& p) {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(CheckpointErrorKind::missing_tensor, source, "no tensor '" + name + "'");
    const Entry& e = *it->second;
    auto want = expected_shape.find(name);
    if (want != expected_shape.end() && want->second != e.shape) {
      fail(CheckpointErrorKind::length_mismatch, source,
           "tensor '" + name + "' has shape " + shape_string(e.shape) + ", config implies " +
               shape_string(want->second));
    }
    std::vector<double> values(shape_size(e.shape));
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(data.data() + e.offset + 4 * i);
    p = Param(Tensor(e.shape, std::move(values)));
    ++used;
  });
  if (m.head) {
    const auto& w = m.head->weight.value;
    if (w.rank() != 2 || w.cols() != m.head->classes.size() || m.head->bias.value.size() != w.cols()) {
      fail(CheckpointErrorKind::length_mismatch, source, "classifier head does not match its class list");
    }
  }
  if (used != entries.size()) {
    for (const auto& e : entries) {
      bool known = false;
      Autobot::each(m, [&](const std::string& name, const Param&) { known = known || name == e.name; });
      if (!known) fail(CheckpointErrorKind::unexpected_tensor, source, "tensor '" + e.name + "' is not part of the model");
    }
  }
  return m;
}

void save_checkpoint(const Autobot& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrorKind::io, "write failed for " + path.string());
}

Autobot load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), path.string());
}

}  // namespace blab
