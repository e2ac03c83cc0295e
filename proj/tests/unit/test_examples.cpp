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

// Worked input/output examples for each module, one TEST_CASE per group.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "blab/checkpoint.hpp"
#include "blab/cli.hpp"
#include "blab/decoder.hpp"
#include "blab/encoder.hpp"
#include "blab/evaluation.hpp"
#include "blab/generation.hpp"
#include "blab/gradcheck.hpp"
#include "blab/optim.hpp"
#include "blab/pipeline.hpp"
#include "blab/training.hpp"

using namespace blab;
using blab::test::bit_equal;
using blab::test::random_tensor;
namespace fs = std::filesystem;

namespace {

Tensor row(std::initializer_list<double> v) { return Tensor({1, v.size()}, std::vector<double>(v)); }

Autobot desk_init(std::uint64_t seed = 0) {
  const RunConfig cfg;
  const auto texts = texts_of(generate_toy_corpus(cfg.corpus_spec()));
  Vocabulary vocab = build_vocab(texts);
  ModelConfig mc = cfg.model;
  mc.encoder.vocab_size = vocab.size();
  return Autobot::initialize(mc, std::move(vocab), seed);
}

}  // namespace

// ---------------------------------------------------------------------------
// numerics

TEST_CASE("matmul examples") {
  Rng rng(1);
  Graph g(Precision::f64);
  const Tensor b = random_tensor({3, 5}, rng);
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  CHECK(matmul(g.constant(eye), g.constant(b)).value() == b);
  CHECK(matmul(g.constant(Tensor::matrix(1, 1, {2})), g.constant(Tensor::matrix(1, 1, {3}))).value()[0] == 6.0);
}

TEST_CASE("softmax examples") {
  Graph g(Precision::f64);
  const Tensor a = softmax(g.constant(row({1, 1, 1})), 1).value();
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const Tensor b = softmax(g.constant(row({0, std::log(2.0)})), 1).value();
  CHECK(b[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  const Tensor c = softmax(g.constant(row({1000, 1001})), 1).value();
  CHECK(c[0] == doctest::Approx(1 / (1 + std::numbers::e)).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(std::numbers::e / (1 + std::numbers::e)).epsilon(1e-14));
}

TEST_CASE("layer norm examples") {
  Graph g(Precision::f64);
  const Var gamma = g.constant(Tensor({3}, std::vector<double>{2, -1, 5}));
  const Var beta = g.constant(Tensor({3}, std::vector<double>{0.1, 0.2, 0.3}));
  const Tensor y = layer_norm(g.constant(row({4, 4, 4})), gamma, beta).value();
  CHECK(y[0] == 0.1);
  CHECK(y[1] == 0.2);
  CHECK(y[2] == 0.3);
  const Tensor z = layer_norm(g.constant(row({1, -1})), g.constant(Tensor({2}, 1.0)), g.constant(Tensor({2}, 0.0)))
                       .value();
  CHECK(z[0] == doctest::Approx(1 / std::sqrt(1 + 1e-5)).epsilon(1e-14));
  CHECK(z[1] == doctest::Approx(-1 / std::sqrt(1 + 1e-5)).epsilon(1e-14));
}

TEST_CASE("activation examples") {
  Graph g(Precision::f64);
  CHECK(sigmoid(g.constant(Tensor::scalar(0))).value().item() == 0.5);
  CHECK(sigmoid(g.constant(Tensor::scalar(std::log(3.0)))).value().item() == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(gelu(g.constant(Tensor::scalar(0))).value().item() == 0.0);
}

TEST_CASE("nll examples") {
  Graph g(Precision::f64);
  const std::vector<int> t{2, 0};
  CHECK(nll_loss(g.constant(Tensor({2, 7}, 0.3)), t, -1).value().item() == doctest::Approx(std::log(7.0)));
  Tensor sharp({1, 4}, 0.0);
  sharp[1] = 1000.0;
  const std::vector<int> one{1};
  CHECK(nll_loss(g.constant(sharp), one, -1).value().item() < 1e-12);
}

TEST_CASE("backward examples") {
  Rng rng(2);
  {
    Graph g(Precision::f64);
    const Var x = g.input(random_tensor({2, 3}, rng));
    g.backward(sum(x));
    for (double v : x.grad().values()) CHECK(v == 1.0);
  }
  {
    Graph g(Precision::f64);
    const Var x = g.input(random_tensor({1, 4}, rng));
    g.backward(sum(softmax(x, 1)));
    for (double v : x.grad().values()) CHECK(std::abs(v) < 1e-15);
  }
}

TEST_CASE("grad_check examples") {
  Rng rng(3);
  const Tensor w = random_tensor({3, 2}, rng);
  const GradFn linear_f = [w](Graph& g, std::span<const Var> in) { return sum(matmul(in[0], g.constant(w))); };
  CHECK(grad_check(linear_f, {random_tensor({2, 3}, rng)}).max_rel_error <= 1e-9);
  const Tensor mix = random_tensor({2, 5}, rng);
  const GradFn soft = [mix](Graph& g, std::span<const Var> in) { return sum(mul(softmax(in[0], 1), g.constant(mix))); };
  CHECK(grad_check(soft, {random_tensor({2, 5}, rng)}).max_rel_error <= 1e-4);
  const GradFn mlp = [](Graph&, std::span<const Var> in) {
    const Var h = gelu(add_row(matmul(in[0], in[1]), in[2]));
    const Var n = layer_norm(h, in[3], in[4]);
    return sum(mul(matmul(n, in[5]), matmul(n, in[5])));
  };
  CHECK(grad_check(mlp, {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng),
                         random_tensor({5}, rng), random_tensor({5}, rng), random_tensor({5, 2}, rng)})
            .max_rel_error <= 1e-4);
}

TEST_CASE("adam examples") {
  Param p(Tensor({2}, std::vector<double>{1.0, 2.0}));
  std::vector<Param*> ps{&p};
  AdamState adam;
  adam.step(ps, 0.1, Precision::f64);
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == 2.0);
  p.grad = Tensor({2}, std::vector<double>{1.0, -1.0});
  AdamState fresh;
  fresh.step(ps, 0.0, Precision::f64);
  CHECK(p.value[0] == 1.0);
  CHECK(fresh.first_moment()[0][0] == doctest::Approx(0.1));
}

TEST_CASE("schedule examples") {
  const LrSchedule s{1e-3, 100, 1100};
  CHECK(lr_at(s, 100) == 1e-3);
  CHECK(lr_at(s, 1100) == 0.0);
  CHECK(lr_at(s, 600) == doctest::Approx(5e-4).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// text

TEST_CASE("vocabulary examples") {
  CHECK(build_vocab(std::vector<std::string>{}).size() == 7);
  const std::vector<std::string> c{"a b a"};
  const Vocabulary v = build_vocab(c, 2);
  CHECK(v.size() == 8);
  CHECK(v.contains("a"));
  CHECK(encode(v, "b", 8)[1] == kUnk);
  CHECK(build_vocab(c).tokens() == build_vocab(c).tokens());
}

TEST_CASE("encode and decode examples") {
  const std::vector<std::string> c{"a b"};
  const Vocabulary v = build_vocab(c);
  CHECK(encode(v, "", 8) == std::vector<int>{kCls, kSep});
  CHECK(encode(v, "a b", 8) == std::vector<int>{kCls, v.id("a"), v.id("b"), kSep});
  std::string hundred;
  for (int i = 0; i < 100; ++i) hundred += "a ";
  const auto ids = encode(v, hundred, 8);
  CHECK(ids.size() == 8);
  CHECK(ids.back() == kSep);
  const std::vector<int> one{kCls, v.id("a"), kSep};
  CHECK(decode(v, one) == "a");
  CHECK(decode(v, encode(v, "b a b", 8)) == "b a b");
  const std::vector<int> framing{kBos, kEos};
  CHECK(decode(v, framing).empty());
}

TEST_CASE("corruption examples") {
  const auto spec = ToyCorpusSpec::desk_default();
  std::vector<std::string> texts;
  for (const auto& r : generate_toy_corpus(spec)) texts.push_back(r.text);
  const Vocabulary v = build_vocab(texts);
  CorruptionPolicy off;
  off.select_prob = 0.0;
  Rng rng(5);
  const auto ids = encode(v, texts[0], 32);
  const auto same = corrupt(ids, off, v, rng);
  CHECK(same.ids == ids);
  CHECK(same.selected.empty());

  // 10,000-token stream: 2,000 five-token sentences.
  Rng stream(2024);
  std::size_t tokens = 0, selected = 0, masked = 0;
  for (std::size_t i = 0; tokens < 10000; ++i) {
    const auto s = encode(v, texts[i % texts.size()], 32);
    const auto c = corrupt(s, CorruptionPolicy{}, v, stream);
    tokens += s.size() - 2;
    selected += c.selected.size();
    for (std::size_t p : c.selected) masked += c.ids[p] == kMask ? 1 : 0;
    CHECK(c.ids.front() == kCls);
    CHECK(c.ids.back() == kSep);
  }
  const double sel = static_cast<double>(selected) / static_cast<double>(tokens);
  const double msk = static_cast<double>(masked) / static_cast<double>(selected);
  CHECK(sel >= 0.13);
  CHECK(sel <= 0.17);
  CHECK(msk >= 0.75);
  CHECK(msk <= 0.85);
}

TEST_CASE("synthetic corpus examples") {
  ToyCorpusSpec spec = ToyCorpusSpec::desk_default();
  spec.count = 2000;
  const auto rows = generate_toy_corpus(spec);
  std::size_t pos = 0;
  std::set<std::string> allowed;
  for (const auto* list : {&spec.determiners, &spec.subjects, &spec.verbs, &spec.adverbs, &spec.positive, &spec.negative})
    allowed.insert(list->begin(), list->end());
  for (const auto& r : rows) {
    pos += r.label == "pos" ? 1 : 0;
    for (const auto& t : tokenize(r.text)) CHECK(allowed.count(t) == 1);
  }
  CHECK(pos >= 960);
  CHECK(pos <= 1040);
  const auto again = generate_toy_corpus(spec);
  CHECK(again.front().text == rows.front().text);
  CHECK(again.back().text == rows.back().text);
}

TEST_CASE("file parsing examples") {
  const fs::path dir = fs::temp_directory_path() / "blab_examples_files";
  fs::create_directories(dir);
  std::ofstream(dir / "l.tsv") << "pos\tgood food\n";
  const auto l = load_labeled_tsv(dir / "l.tsv");
  CHECK(l[0].label == "pos");
  CHECK(l[0].text == "good food");
  std::ofstream(dir / "p.tsv") << "3.5\ta b\tc d\n";
  const auto p = load_pairs_tsv(dir / "p.tsv", PairKind::scored);
  CHECK(*p[0].score == 3.5);
  CHECK(p[0].first == "a b");
  CHECK(p[0].second == "c d");
  std::ofstream(dir / "bad.tsv") << "pos\tfine\nlonely\n";
  try {
    load_labeled_tsv(dir / "bad.tsv");
    FAIL("expected an error");
  } catch (const TextError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// encoder

TEST_CASE("encoder examples") {
  const Autobot m = blab::test::tiny_model();
  Graph g;
  const EncoderVars ev = bind_encoder(g, m.encoder);
  const std::vector<std::vector<int>> seqs{m.encode_text("the cat"), m.encode_text("a dog sat loudly")};
  Batch batch = make_batch(seqs);
  const Tensor h = encoder_forward(ev, m.config.encoder, batch, false, nullptr).hidden.value();
  CHECK(h.rows() == 2 * batch.seq_len);
  CHECK(h.cols() == 8);

  Batch altered = batch;
  for (std::size_t i = 0; i < altered.ids.size(); ++i) {
    if (!altered.mask[i]) altered.ids[i] = 9;
  }
  const Tensor h2 = encoder_forward(ev, m.config.encoder, altered, false, nullptr).hidden.value();
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    if (!batch.mask[i]) continue;
    for (std::size_t c = 0; c < 8; ++c) CHECK(h(i, c) == h2(i, c));
  }
  const Tensor h3 = encoder_forward(ev, m.config.encoder, batch, false, nullptr).hidden.value();
  CHECK(h3 == h);
}

TEST_CASE("mlm loss at initialisation is about ln V") {
  const Autobot m = desk_init();
  const RunConfig cfg;
  const auto texts = texts_of(generate_toy_corpus(cfg.corpus_spec()));
  Rng rng(6);
  double total = 0.0;
  for (int b = 0; b < 10; ++b) {
    std::vector<std::vector<int>> batch;
    for (int i = 0; i < 32; ++i) batch.push_back(m.encode_text(texts[rng.below(texts.size())]));
    Graph g;
    total += mlm_loss(bind_encoder(g, m.encoder), m.config.encoder, batch, CorruptionPolicy{}, m.vocab, rng, false)
                 .value()
                 .item();
  }
  const double ln_v = std::log(static_cast<double>(m.vocab.size()));
  CHECK(total / 10 == doctest::Approx(ln_v).epsilon(0.15));
}

TEST_CASE("pretraining examples") {
  const auto texts = blab::test::tiny_corpus();
  const Vocabulary v = build_vocab(texts);
  const EncoderConfig ec = blab::test::tiny_config(v.size()).encoder;
  PretrainConfig pc;
  pc.steps = 0;
  const EncoderParams zero = pretrain_mlm(texts, v, ec, pc);
  const EncoderParams init = initial_encoder(ec, pc.seed);
  CHECK(bit_equal(zero.tok_emb.value, init.tok_emb.value));
  pc.steps = 5;
  pc.warmup_steps = 2;
  pc.batch_size = 4;
  const EncoderParams a = pretrain_mlm(texts, v, ec, pc), b = pretrain_mlm(texts, v, ec, pc);
  bool same = true;
  EncoderParams::each(a, "", [&](const std::string& name, const Param& p) {
    EncoderParams::each(b, "", [&](const std::string& n2, const Param& q) {
      if (n2 == name) same = same && bit_equal(p.value, q.value);
    });
  });
  CHECK(same);
}

// ---------------------------------------------------------------------------
// bottleneck

TEST_CASE("bottleneck examples") {
  {
    Graph g(Precision::f64);
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
    Tensor hv({4, 3});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 3; ++c) hv(t, c) = 0.5 + static_cast<double>(c);
    const EncoderOutput h{g.constant(hv), 1, 4, {1, 1, 1, 1}};
    const BottleneckVars bv{g.constant(eye), g.constant(eye), g.constant(eye), 1};
    const Tensor z = bottleneck_forward(bv, h).value();
    for (std::size_t c = 0; c < 3; ++c) CHECK(z[c] == doctest::Approx(0.5 + static_cast<double>(c)).epsilon(1e-15));
  }
  {
    Graph g(Precision::f64);
    const EncoderOutput h{g.constant(Tensor::matrix(2, 1, {2, 4})), 1, 2, {1, 1}};
    const BottleneckVars bv{g.constant(Tensor::matrix(1, 1, {0.5})), g.constant(Tensor::matrix(1, 1, {0})),
                            g.constant(Tensor::matrix(1, 1, {1})), 1};
    std::vector<Var> w;
    const Tensor z = bottleneck_forward(bv, h, &w).value();
    CHECK(w[0].value()[0] == 0.5);
    CHECK(w[0].value()[1] == 0.5);
    CHECK(z[0] == 3.0);
  }
  {
    // two tokens, two heads of width 2: scalar-loop oracle
    Rng rng(7);
    const std::size_t d = 4, heads = 2, dh = 2;
    const Tensor hv = random_tensor({2, d}, rng), wq = random_tensor({d, d}, rng), wk = random_tensor({d, d}, rng),
                 wv = random_tensor({d, d}, rng);
    Graph g(Precision::f64);
    const EncoderOutput h{g.constant(hv), 1, 2, {1, 1}};
    const Tensor z =
        bottleneck_forward({g.constant(wq), g.constant(wk), g.constant(wv), heads}, h).value();
    for (std::size_t hd = 0; hd < heads; ++hd) {
      double score[2];
      for (std::size_t t = 0; t < 2; ++t) {
        double s = 0.0;
        for (std::size_t j = hd * dh; j < (hd + 1) * dh; ++j) {
          double q = 0, k = 0;
          for (std::size_t i = 0; i < d; ++i) {
            q += hv(0, i) * wq(i, j);
            k += hv(t, i) * wk(i, j);
          }
          s += q * k;
        }
        score[t] = s / std::sqrt(static_cast<double>(dh));
      }
      const double m = std::max(score[0], score[1]);
      const double e0 = std::exp(score[0] - m), e1 = std::exp(score[1] - m);
      const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
      for (std::size_t j = hd * dh; j < (hd + 1) * dh; ++j) {
        double v0 = 0, v1 = 0;
        for (std::size_t i = 0; i < d; ++i) {
          v0 += hv(0, i) * wv(i, j);
          v1 += hv(1, i) * wv(i, j);
        }
        CHECK(z[j] == doctest::Approx(a0 * v0 + a1 * v1).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("pooling examples") {
  Graph g(Precision::f64);
  const EncoderOutput one{g.constant(Tensor::matrix(1, 2, {0.3, -0.7})), 1, 1, {1}};
  for (PoolingMode mode : {PoolingMode::mean, PoolingMode::max, PoolingMode::cls}) {
    const Tensor p = pool(one, mode).value();
    CHECK(p[0] == 0.3);
    CHECK(p[1] == -0.7);
  }
  const EncoderOutput two{g.constant(Tensor::matrix(2, 2, {1, 0, 3, 2})), 1, 2, {1, 1}};
  CHECK(pool(two, PoolingMode::mean).value() == Tensor::matrix(1, 2, {2, 1}));
  CHECK(pool(two, PoolingMode::max).value() == Tensor::matrix(1, 2, {3, 2}));
  const EncoderOutput padded{g.constant(Tensor::matrix(4, 2, {1, 0, 3, 2, 50, 60, -9, -9})), 1, 4, {1, 1, 0, 0}};
  CHECK(pool(padded, PoolingMode::mean).value() == Tensor::matrix(1, 2, {2, 1}));
  CHECK(pool(padded, PoolingMode::max).value() == Tensor::matrix(1, 2, {3, 2}));
}

TEST_CASE("parameter count examples") {
  ModelConfig toy;
  toy.encoder.vocab_size = 119;
  CHECK(count_added_params(toy).bottleneck == 3072);
  ModelConfig none = toy;
  none.decoder_layers = 0;
  const auto r = count_added_params(none);
  CHECK(r.decoder == r.decoder_embeddings);
  const std::string text = count_added_params(published_base_config()).render();
  CHECK(text.find("1.6%") != std::string::npos);
  CHECK(text.find("discrepancy") != std::string::npos);
}

// ---------------------------------------------------------------------------
// decoder

TEST_CASE("gated cross-attention examples") {
  Rng rng(8);
  const std::size_t T = 4, d = 3;
  const Tensor q = random_tensor({T, d}, rng), z = random_tensor({1, d}, rng), wv = random_tensor({d, d}, rng);
  Graph g(Precision::f64);
  const Var zero = g.constant(Tensor({d, d}));
  const Tensor o = gated_cross_attention(g.constant(q), g.constant(z), {zero, zero, g.constant(wv)}).value();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0;
      for (std::size_t i = 0; i < d; ++i) v += z(0, i) * wv(i, j);
      CHECK(o(t, j) == doctest::Approx(0.5 * v).epsilon(1e-15));
    }
  }
  const GatedCrossVars random{g.constant(random_tensor({d, d}, rng)), g.constant(random_tensor({d, d}, rng)),
                              g.constant(wv)};
  const Tensor oz = gated_cross_attention(g.constant(q), g.constant(Tensor({1, d})), random).value();
  for (double x : oz.values()) CHECK(x == 0.0);
  const Tensor on = gated_cross_attention(g.constant(q), g.constant(z), random).value();
  CHECK(on(0, 0) != on(1, 0));
}

TEST_CASE("ungated single-key examples") {
  Rng rng(9);
  const std::size_t T = 4, d = 3;
  const Tensor z = random_tensor({1, d}, rng), wv = random_tensor({d, d}, rng);
  Graph g(Precision::f64);
  const Tensor o = ungated_single_key_attention(g.constant(random_tensor({T, d}, rng)), g.constant(z),
                                                g.constant(random_tensor({d, d}, rng)), g.constant(wv))
                       .value();
  const Tensor zw = matmul(g.constant(z), g.constant(wv)).value();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < d; ++j) CHECK(o(t, j) == zw[j]);
}

TEST_CASE("decoder examples") {
  const Autobot m = blab::test::tiny_model();
  Graph g(Precision::f64);
  const DecoderVars dv = bind_decoder(g, m.decoder);
  Rng rng(10);
  const Var z = g.constant(random_tensor({1, 8}, rng));
  const std::vector<std::vector<int>> in{{kBos, 8, 9, 10}};
  const Tensor logits = decoder_forward(dv, m.config, z, make_batch(in), false, nullptr).value();
  CHECK(logits.rows() == 4);
  CHECK(logits.cols() == m.vocab.size());

  // Cross-attention is the only route for z: the gated block's contribution
  // varies with position, the ungated one would not.
  DecoderTrace trace;
  decoder_forward(dv, m.config, z, make_batch(in), false, nullptr, &trace);
  const Tensor& co = trace.cross_out.value();
  CHECK(co(0, 0) != co(1, 0));
  const Tensor un = ungated_single_key_attention(trace.cross_queries, z, g.constant(random_tensor({8, 8}, rng)),
                                                 dv.layers[0].cross.wv)
                        .value();
  for (std::size_t t = 1; t < un.rows(); ++t)
    for (std::size_t c = 0; c < 8; ++c) CHECK(un(t, c) == un(0, c));
}

TEST_CASE("reconstruction loss examples") {
  const Autobot m = desk_init();
  const RunConfig cfg;
  const auto texts = texts_of(generate_toy_corpus(cfg.corpus_spec()));
  Graph g;
  const DecoderVars dv = bind_decoder(g, m.decoder);
  std::vector<std::vector<int>> contents;
  for (std::size_t i = 0; i < 32; ++i) contents.push_back(m.target_ids(texts[i]));
  Rng rng(11);
  const Var z = g.constant(random_tensor({32, m.config.encoder.d_model}, rng, 0.5));
  const double loss = reconstruction_loss(dv, m.config, z, contents, false, nullptr).value().item();
  CHECK(loss == doctest::Approx(std::log(static_cast<double>(m.vocab.size()))).epsilon(0.15));
  const double again = reconstruction_loss(dv, m.config, z, contents, false, nullptr).value().item();
  CHECK(again == loss);
}

// ---------------------------------------------------------------------------
// training

TEST_CASE("train_autoencoder examples") {
  std::vector<std::string> corpus;
  for (int r = 0; r < 3; ++r)
    for (const auto& s : blab::test::tiny_corpus()) corpus.push_back(s);
  TrainConfig cfg;
  cfg.steps = 0;
  Autobot m = blab::test::tiny_model();
  const Autobot before = m;
  train_autoencoder(m, corpus, cfg);
  CHECK(same_parameters(m, before));

  cfg.steps = 6;
  cfg.warmup_steps = 2;
  cfg.batch_size = 4;
  Autobot a = blab::test::tiny_model(), b = blab::test::tiny_model();
  train_autoencoder(a, corpus, cfg);
  train_autoencoder(b, corpus, cfg);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
}

TEST_CASE("single-example classifier finetuning") {
  const Autobot m = blab::test::tiny_model();
  const std::vector<LabeledText> one{{"pos", "the cat sat"}};
  FinetuneConfig cfg;
  cfg.steps = 5;
  cfg.warmup_steps = 1;
  const auto r = classifier_finetune(m, one, {}, cfg);
  CHECK(r.train_accuracy == 1.0);
}

// ---------------------------------------------------------------------------
// generation

TEST_CASE("steering examples") {
  const Autobot m = blab::test::tiny_model();
  const std::vector<std::string> a{"the cat sat there", "a dog sat loudly"};
  const std::vector<std::string> b{"a dog sat loudly", "the cat sat there"};
  const SteeringVector zero = compute_steering_vector(m, a, b);
  for (double x : zero.v.values()) CHECK(x == 0.0);

  const std::vector<std::string> pos{"the soup was great"}, neg{"the soup was awful"};
  const SteeringVector v = compute_steering_vector(m, pos, neg);
  SteeringVector minus = v;
  for (std::size_t i = 0; i < minus.v.size(); ++i) minus.v[i] = -v.v[i];
  const auto t1 = transfer(m, "a cat sat quietly", minus, 1.5);
  const auto t2 = transfer(m, "a cat sat quietly", v, -1.5);
  CHECK(bit_equal(t1.z_shifted, t2.z_shifted));
  CHECK(t1.output == t2.output);
}

TEST_CASE("interpolation endpoints do not depend on the step count") {
  const Autobot m = blab::test::tiny_model();
  const auto three = interpolate(m, "the cat sat there", "a dog sat loudly", 3);
  const auto nine = interpolate(m, "the cat sat there", "a dog sat loudly", 9);
  CHECK(three.front() == nine.front());
  CHECK(three.back() == nine.back());
}

// ---------------------------------------------------------------------------
// evaluation

TEST_CASE("bleu examples") {
  const std::vector<std::string> same{"one two three four", "five six seven eight nine"};
  CHECK(corpus_bleu(same, same) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(corpus_bleu(std::vector<std::string>{"a b c d"}, std::vector<std::string>{"e f g h"}) == 0.0);
  const std::vector<std::string> c{"a b c d"}, r{"a b c e"};
  CHECK(corpus_bleu(c, r) == 0.0);
  BleuConfig eps;
  eps.smoothing = BleuSmoothing::add_epsilon;
  const double want = std::pow(0.75 * (2.0 / 3) * 0.5 * 1e-9, 0.25);
  CHECK(std::abs(corpus_bleu(c, r, eps) - want) <= 1e-9);
  CHECK(corpus_bleu(c, r, eps) > 0.0);
}

TEST_CASE("spearman and cosine examples") {
  const std::vector<double> x{0.1, 0.5, 0.9, 2.0}, y{1, 2, 3, 4}, rev{4, 3, 2, 1};
  CHECK(spearman(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, rev) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> u{0.3, -2.0}, e1{1, 0}, e2{0, 1}, nu{-0.3, 2.0};
  CHECK(cosine(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(e1, e2) == 0.0);
  CHECK(cosine(u, nu) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("sts_eval examples") {
  const Autobot m = blab::test::tiny_model();
  std::vector<PairRecord> pairs{{"", 0.0, "the cat sat there", "a dog sat loudly"},
                                {"", 0.0, "the soup was great", "the soup was awful"},
                                {"", 0.0, "a cat sat quietly", "the dog was awful"},
                                {"", 0.0, "the cat was great", "a soup sat there"}};
  const auto cos = pair_cosines(m, pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].score = cos[i];
  CHECK(sts_eval(m, pairs) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].score = -cos[i];
  CHECK(sts_eval(m, pairs) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("bag-of-words examples") {
  const std::vector<LabeledText> data{{"pos", "good food"}, {"pos", "good place"}, {"pos", "nice food"},
                                      {"neg", "bad food"}};
  const BowClassifier c = train_transfer_classifier(data, 300, 0.5);
  CHECK(c.predict("") == "pos");
  CHECK(c.predict("food good") == c.predict("good food"));
  CHECK(c.scores("place bad") == c.scores("bad place"));

  const RunConfig cfg;
  const auto rows = generate_toy_corpus(cfg.corpus_spec());
  BowTrainLog log;
  const BowClassifier toy = train_transfer_classifier(rows, 200, 0.1, &log);
  for (std::size_t i = 1; i < log.loss.size(); ++i) CHECK(log.loss[i] <= log.loss[i - 1] + 1e-12);
  CHECK(train_transfer_classifier(rows).accuracy(rows) >= 0.95);
}

TEST_CASE("token accuracy examples") {
  const std::vector<int> a{5, 6, 7}, b{8, 9};
  CHECK(token_accuracy(a, a) == 1.0);
  CHECK(exact_match(a, a) == 1);
  CHECK(token_accuracy(b, std::vector<int>{10, 11}) == 0.0);
  CHECK(exact_match(b, std::vector<int>{10, 11}) == 0);
  CHECK(token_accuracy(std::vector<int>{1, 2}, std::vector<int>{1, 2, 3}) == doctest::Approx(2.0 / 3));
  CHECK(exact_match(std::vector<int>{1, 2}, std::vector<int>{1, 2, 3}) == 0);
}

TEST_CASE("pooling ablation examples") {
  const Autobot m = blab::test::tiny_model();
  const std::vector<PairRecord> train{{"same", std::nullopt, "the soup was great", "the cat was great"},
                                      {"different", std::nullopt, "the soup was great", "the dog was awful"}};
  const std::vector<PairRecord> eval{{"", 1.0, "the cat sat there", "a dog sat loudly"},
                                     {"", 3.0, "the soup was great", "the soup was awful"},
                                     {"", 0.0, "a cat sat quietly", "the dog was awful"}};
  FinetuneConfig cfg;
  cfg.steps = 4;
  cfg.warmup_steps = 1;
  cfg.batch_size = 2;
  const auto a = pooling_ablation(m, train, eval, cfg);
  const auto b = pooling_ablation(m, train, eval, cfg);
  REQUIRE(a.size() == 4);
  CHECK(pooling_report(a).csv() == pooling_report(b).csv());
  CHECK(pooling_report(a).json() == pooling_report(b).json());
}

// ---------------------------------------------------------------------------
// checkpoints and cli

TEST_CASE("checkpoint bounds error names the tensor") {
  const std::string good = serialize_checkpoint(blab::test::tiny_model());
  try {
    parse_checkpoint(good.substr(0, good.size() - 1));
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointErrorKind::out_of_bounds);
    CHECK(std::string(e.what()).find("decoder.") != std::string::npos);
  }
}

TEST_CASE("cli and explore examples") {
  const fs::path dir = fs::temp_directory_path() / "blab_examples_cli";
  fs::create_directories(dir);
  RunConfig cfg;
  cfg.model.encoder.d_model = 16;
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.json") << "{\"model.d_model\": 16, \"model.bottleneck_heads\": 4}";
  std::vector<const char*> argv{"blab", "params", "--config", nullptr};
  const std::string cfg_path = (dir / "cfg.json").string();
  argv[3] = cfg_path.c_str();
  std::istringstream in;
  std::ostringstream out, err;
  CHECK(cli::run(4, argv.data(), in, out, err) == 0);
  CHECK(out.str().find("bottleneck_params=768") != std::string::npos);

  const Autobot m = blab::test::tiny_model();
  std::map<std::string, SteeringVector> vs;
  vs["sentiment"] = compute_steering_vector(m, std::vector<std::string>{"the soup was great"},
                                            std::vector<std::string>{"the soup was awful"});
  std::istringstream script("enc a cat sat quietly\ndec\nadd sentiment 0\n");
  std::ostringstream transcript;
  cli::explore(m, vs, script, transcript);
  const std::string recon = reconstruct(m, "a cat sat quietly");
  std::istringstream lines(transcript.str());
  std::vector<std::string> decoded;
  for (std::string l; std::getline(lines, l);) {
    if (l.rfind("  ", 0) == 0 && l.rfind("  norm", 0) != 0) decoded.push_back(l.substr(2));
  }
  CHECK(decoded == std::vector<std::string>{recon, recon, recon});
  fs::remove_all(dir);
}
