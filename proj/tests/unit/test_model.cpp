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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "blab/bottleneck.hpp"
#include "blab/checkpoint.hpp"
#include "blab/decoder.hpp"
#include "blab/encoder.hpp"
#include "blab/kernels.hpp"
#include "blab/model.hpp"

using namespace blab;
using blab::test::bit_equal;
using blab::test::random_tensor;

namespace {

std::size_t each_count(const Autobot& m, const std::string& prefix) {
  std::size_t n = 0;
  Autobot::each(m, [&](const std::string& name, const Param& p) {
    if (name.rfind(prefix, 0) == 0) n += p.value.size();
  });
  return n;
}

}  // namespace

TEST_CASE("parameter shapes agree with the materialised model") {
  const Autobot m = blab::test::tiny_model();
  const ModelConfig& c = m.config;
  const auto report = count_added_params(c);
  CHECK(report.encoder == each_count(m, "encoder."));
  CHECK(report.bottleneck == each_count(m, "bottleneck."));
  CHECK(report.decoder == each_count(m, "decoder."));
  CHECK(count_values(EncoderParams::shapes(c.encoder)) == report.encoder);
}

TEST_CASE("bottleneck parameter count is 3 d^2 whatever the head count") {
  for (std::size_t heads : {1u, 2u, 4u, 8u}) {
    ModelConfig c = blab::test::tiny_config(30);
    c.bottleneck_heads = heads;
    CHECK(count_added_params(c).bottleneck == 3 * 8 * 8);
  }
  ModelConfig toy;
  toy.encoder.vocab_size = 119;
  CHECK(count_added_params(toy).bottleneck == 3 * 32 * 32);
}

TEST_CASE("encoder parameter count matches a hand formula") {
  ModelConfig c = published_base_config();
  const std::size_t d = 768, V = 50265, L = 128, f = 4 * d;
  const std::size_t layer = 4 * (d * d + d) + 2 * 2 * d + (d * f + f) + (f * d + d);
  CHECK(count_added_params(c).encoder == V * d + L * d + 12 * layer);
  CHECK(count_added_params(c).bottleneck == 3 * d * d);
}

TEST_CASE("decoder token embedding starts as a copy of the encoder's") {
  const Autobot m = blab::test::tiny_model();
  CHECK(bit_equal(m.decoder.tok_emb.value, m.encoder.tok_emb.value));
}

TEST_CASE("bottleneck output is independent of padding") {
  const Autobot m = blab::test::tiny_model();
  const std::vector<std::string> short_only{"the cat sat"};
  const std::vector<std::string> padded{"the cat sat", "the soup was great and awful there"};
  const Tensor a = sentence_vectors(m, short_only);
  const Tensor b = sentence_vectors(m, padded);
  for (std::size_t c = 0; c < a.cols(); ++c) CHECK(a(0, c) == doctest::Approx(b(0, c)).epsilon(1e-6));
}

TEST_CASE("bottleneck attention weights are a distribution over non-pad positions") {
  const Autobot m = blab::test::tiny_model();
  Graph g;
  const EncoderVars ev = bind_encoder(g, m.encoder);
  const std::vector<std::vector<int>> seqs{m.encode_text("the cat"), m.encode_text("a dog sat loudly")};
  const Batch batch = make_batch(seqs);
  const EncoderOutput h = encoder_forward(ev, m.config.encoder, batch, false, nullptr);
  std::vector<Var> weights;
  const Var z = bottleneck_forward(bind_bottleneck(g, m.bottleneck, false), h, &weights);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 8);
  REQUIRE(weights.size() == 2 * m.bottleneck.n_heads);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t hd = 0; hd < m.bottleneck.n_heads; ++hd) {
      const Tensor& w = weights[r * m.bottleneck.n_heads + hd].value();
      double total = 0.0;
      for (std::size_t t = 0; t < batch.seq_len; ++t) {
        if (!batch.mask[r * batch.seq_len + t]) CHECK(w[t] == 0.0);
        total += w[t];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
}

TEST_CASE("pooling modes reduce over real tokens only") {
  Graph g(Precision::f64);
  Tensor hv({2 * 3, 2});
  const std::vector<double> vals{1, 2, 3, 4, 5, -6, /*row 1*/ 7, 8, 0, 0, 0, 0};
  for (std::size_t i = 0; i < vals.size(); ++i) hv[i] = vals[i];
  const EncoderOutput h{g.constant(hv), 2, 3, {1, 1, 1, 1, 0, 0}};
  const Tensor mean_v = pool(h, PoolingMode::mean).value();
  CHECK(mean_v(0, 0) == doctest::Approx(3.0));
  CHECK(mean_v(0, 1) == doctest::Approx(0.0));
  CHECK(mean_v(1, 0) == doctest::Approx(7.0));
  const Tensor max_v = pool(h, PoolingMode::max).value();
  CHECK(max_v(0, 1) == 4.0);
  CHECK(max_v(1, 1) == 8.0);
  const Tensor cls_v = pool(h, PoolingMode::cls).value();
  CHECK(cls_v(1, 0) == 7.0);
  CHECK_THROWS(pool(h, PoolingMode::bottleneck));
  CHECK(parse_pooling("beta") == PoolingMode::bottleneck);
  CHECK_THROWS(parse_pooling("median"));
}

TEST_CASE("single-key attention is identical across timesteps and ignores W_K") {
  Rng rng(21);
  const std::size_t T = 5, d = 6;
  const Tensor q = random_tensor({T, d}, rng), z = random_tensor({1, d}, rng);
  const Tensor wk1 = random_tensor({d, d}, rng), wk2 = random_tensor({d, d}, rng), wv = random_tensor({d, d}, rng);
  Graph g(Precision::f64);
  const Tensor o1 = ungated_single_key_attention(g.constant(q), g.constant(z), g.constant(wk1), g.constant(wv)).value();
  const Tensor o2 = ungated_single_key_attention(g.constant(q), g.constant(z), g.constant(wk2), g.constant(wv)).value();
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t c = 0; c < d; ++c) CHECK(o1(t, c) == o1(0, c));
  CHECK(bit_equal(o1, o2));

  const GatedCrossVars gv{g.constant(random_tensor({d, d}, rng)), g.constant(random_tensor({d, d}, rng)),
                          g.constant(wv)};
  const Tensor og = gated_cross_attention(g.constant(q), g.constant(z), gv).value();
  double diff = 0.0;
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t c = 0; c < d; ++c) diff = std::max(diff, std::abs(og(t, c) - og(0, c)));
  CHECK(diff > 1e-3);
}

TEST_CASE("gated cross-attention matches an elementwise oracle") {
  Rng rng(22);
  const std::size_t T = 3, d = 4;
  const Tensor q = random_tensor({T, d}, rng), z = random_tensor({1, d}, rng);
  const Tensor G = random_tensor({d, d}, rng), Gp = random_tensor({d, d}, rng), W = random_tensor({d, d}, rng);
  Graph g(Precision::f64);
  const Tensor o = gated_cross_attention(g.constant(q), g.constant(z), {g.constant(G), g.constant(Gp), g.constant(W)})
                       .value();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      double a = 0, v = 0;
      for (std::size_t i = 0; i < d; ++i) {
        a += q(t, i) * G(i, j) + z(0, i) * Gp(i, j);
        v += z(0, i) * W(i, j);
      }
      CHECK(o(t, j) == doctest::Approx(v / (1.0 + std::exp(-a))).epsilon(1e-12));
    }
  }
}

TEST_CASE("decoder is causal: logits at t do not depend on later inputs") {
  const Autobot m = blab::test::tiny_model();
  Graph g(Precision::f64);
  const DecoderVars dv = bind_decoder(g, m.decoder);
  Rng rng(1);
  const Var z = g.constant(random_tensor({1, 8}, rng));
  const std::vector<std::vector<int>> a{{kBos, 8, 9, 10}}, b{{kBos, 8, 11, 12}};
  const Tensor la = decoder_forward(dv, m.config, z, make_batch(a), false, nullptr).value();
  const Tensor lb = decoder_forward(dv, m.config, z, make_batch(b), false, nullptr).value();
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < la.cols(); ++c) CHECK(la(t, c) == lb(t, c));
  CHECK_FALSE(la == lb);
}

TEST_CASE("decoder input and target framing") {
  const std::vector<int> content{9, 10};
  CHECK(decoder_input(content) == std::vector<int>{kBos, 9, 10});
  CHECK(decoder_target(content) == std::vector<int>{9, 10, kEos});
}

TEST_CASE("encoder rejects overlong input and unknown ids") {
  const Autobot m = blab::test::tiny_model();
  Graph g;
  const EncoderVars ev = bind_encoder(g, m.encoder);
  const std::vector<std::vector<int>> too_long{std::vector<int>(11, 8)};
  CHECK_THROWS_AS(encoder_forward(ev, m.config.encoder, make_batch(too_long), false, nullptr), NumericError);
  const std::vector<std::vector<int>> bad{{kCls, 999, kSep}};
  CHECK_THROWS_AS(encoder_forward(ev, m.config.encoder, make_batch(bad), false, nullptr), NumericError);
}

TEST_CASE("mlm loss forces a masked position when nothing is selected") {
  const Autobot m = blab::test::tiny_model();
  Graph g;
  const EncoderVars ev = bind_encoder(g, m.encoder);
  CorruptionPolicy none;
  none.select_prob = 0.0;
  Rng rng(4);
  const std::vector<std::vector<int>> sents{m.encode_text("the cat sat")};
  const Var loss = mlm_loss(ev, m.config.encoder, sents, none, m.vocab, rng, false);
  CHECK(std::isfinite(loss.value().item()));
  CHECK(loss.value().item() > 0.0);
}

TEST_CASE("checkpoint round-trip is bit-identical") {
  Autobot m = blab::test::tiny_model();
  Rng rng(5);
  m.head = ClassifierHead::init({"neg", "pos"}, 8, rng);
  const std::string bytes = serialize_checkpoint(m);
  CHECK(bytes.substr(0, 8) == "ABOT0001");
  const Autobot back = parse_checkpoint(bytes);
  CHECK(same_parameters(m, back));
  CHECK(back.vocab == m.vocab);
  REQUIRE(back.head.has_value());
  CHECK(back.head->classes == m.head->classes);
  CHECK(serialize_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "blab_ckpt_test.abot";
  save_checkpoint(m, path);
  CHECK(same_parameters(load_checkpoint(path), m));
  std::filesystem::remove(path);
}

namespace {

CheckpointErrorKind kind_of(const std::string& bytes) {
  try {
    parse_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return CheckpointErrorKind::io;
}

std::string with_header(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  nlohmann::json h = nlohmann::json::parse(bytes.substr(16, len));
  edit(h);
  const std::string hs = h.dump();
  std::string out = bytes.substr(0, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((hs.size() >> (8 * i)) & 0xff));
  return out + hs + bytes.substr(16 + len);
}

}  // namespace

TEST_CASE("corrupted checkpoints raise distinct errors") {
  const std::string good = serialize_checkpoint(blab::test::tiny_model());

  std::string magic = good;
  magic[0] = 'X';
  CHECK(kind_of(magic) == CheckpointErrorKind::bad_magic);
  CHECK(kind_of(good.substr(0, 12)) == CheckpointErrorKind::truncated);
  CHECK(kind_of(good.substr(0, good.size() - 4)) == CheckpointErrorKind::out_of_bounds);

  CHECK(kind_of(with_header(good, [](nlohmann::json& h) {
          h["tensor_index"][1]["byte_offset"] = h["tensor_index"][0]["byte_offset"];
        })) == CheckpointErrorKind::overlap);
  CHECK(kind_of(with_header(good, [](nlohmann::json& h) { h["tensor_index"][0]["byte_len"] = 4; })) ==
        CheckpointErrorKind::length_mismatch);
  {
    // Drop the last tensor from both the index and the data.
    std::size_t dropped = 0;
    std::string missing = with_header(good, [&](nlohmann::json& h) {
      dropped = h["tensor_index"].back()["byte_len"].get<std::size_t>();
      h["tensor_index"].erase(h["tensor_index"].size() - 1);
    });
    missing.resize(missing.size() - dropped);
    CHECK(kind_of(missing) == CheckpointErrorKind::missing_tensor);
  }
  // Index shorter than the data.
  CHECK(kind_of(with_header(good, [](nlohmann::json& h) { h["tensor_index"].erase(h["tensor_index"].size() - 1); })) ==
        CheckpointErrorKind::length_mismatch);
  CHECK(kind_of(with_header(good, [](nlohmann::json& h) {
          auto extra = h["tensor_index"][0];
          extra["name"] = "encoder.surplus";
          h["tensor_index"].push_back(extra);
        })) != CheckpointErrorKind::io);

  std::string bad_json = good;
  bad_json[16] = '#';
  CHECK(kind_of(bad_json) == CheckpointErrorKind::bad_header);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.abot"), CheckpointError);
  try {
    parse_checkpoint(magic);
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).rfind("bad magic", 0) == 0);
  }
}

TEST_CASE("model outputs do not depend on the thread count") {
  ModelConfig c = blab::test::tiny_config(0);
  c.encoder.d_model = 64;
  c.encoder.n_heads = 4;
  c.bottleneck_heads = 4;
  const auto corpus = blab::test::tiny_corpus();
  Vocabulary v = build_vocab(corpus);
  c.encoder.vocab_size = v.size();
  const Autobot m = Autobot::initialize(c, std::move(v), 8);
  const int saved = kernels::thread_count();
  kernels::set_thread_count(1);
  const Tensor serial = sentence_vectors(m, corpus);
  kernels::set_thread_count(4);
  const Tensor parallel = sentence_vectors(m, corpus);
  kernels::set_thread_count(saved);
  CHECK(bit_equal(serial, parallel));
}
