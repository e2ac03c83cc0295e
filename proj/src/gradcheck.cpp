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

#include "blab/gradcheck.hpp"

#include <cmath>

#include "blab/bottleneck.hpp"
#include "blab/decoder.hpp"
#include "blab/encoder.hpp"
#include "blab/rng.hpp"

namespace blab {

namespace {

double evaluate(const GradFn& f, const std::vector<Tensor>& inputs, std::vector<Tensor>* grads) {
  Graph g(Precision::f64);
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(g.input(x));
  const Var out = f(g, vars);
  if (out.value().size() != 1) {
    throw NumericError("grad_check: function must return a scalar, got " + shape_string(out.value().shape()));
  }
  if (grads != nullptr) {
    g.backward(out);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const Tensor& gr = vars[i].grad();
      grads->push_back(gr.empty() ? Tensor::zeros_like(inputs[i]) : gr);
    }
  }
  return out.value().item();
}

Tensor randn(Rng& rng, Shape shape, double scale = 1.0, double offset = 0.0) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = offset + scale * rng.normal();
  return t;
}

/// Random linear read-out, so every output element gets a distinct weight.
/// Weights are regenerated from the seed on each call to match the output.
struct Projection {
  std::uint64_t seed = 0;
  Var operator()(Var out) const {
    Graph& g = *out.graph;
    Rng r(seed);
    return sum(mul(out, g.constant(randn(r, out.shape()))));
  }
};

Projection projection_for(Rng& rng, std::size_t /*size*/) { return {rng.next_u64()}; }

struct Case {
  std::string name;
  GradFn fn;
  std::vector<Tensor> inputs;
};

void add_primitive_cases(std::vector<Case>& cases, Rng& rng) {
  const auto unary = [&](const std::string& name, Shape shape, auto op, double offset = 0.0) {
    Tensor x = randn(rng, shape, 1.0, offset);
    const Projection p = projection_for(rng, x.size());
    cases.push_back({name, [p, op](Graph&, std::span<const Var> v) { return p(op(v[0])); }, {x}});
  };
  const auto binary = [&](const std::string& name, Shape sa, Shape sb, Shape so, auto op) {
    const Projection p = projection_for(rng, shape_size(so));
    cases.push_back({name, [p, op](Graph&, std::span<const Var> v) { return p(op(v[0], v[1])); },
                     {randn(rng, sa), randn(rng, sb)}});
  };

  binary("matmul", {3, 4}, {4, 5}, {3, 5}, [](Var a, Var b) { return matmul(a, b); });
  unary("transpose", {3, 4}, [](Var a) { return transpose(a); });
  binary("add", {3, 4}, {3, 4}, {3, 4}, [](Var a, Var b) { return add(a, b); });
  binary("sub", {3, 4}, {3, 4}, {3, 4}, [](Var a, Var b) { return sub(a, b); });
  binary("mul", {3, 4}, {3, 4}, {3, 4}, [](Var a, Var b) { return mul(a, b); });
  unary("scale", {3, 4}, [](Var a) { return scale(a, -1.7); });
  binary("add_row", {3, 4}, {4}, {3, 4}, [](Var a, Var b) { return add_row(a, b); });
  {
    // Keep every coordinate well away from the kink at zero.
    Tensor x = randn(rng, {3, 4});
    for (double& v : x.values()) v += v >= 0 ? 0.5 : -0.5;
    const Projection p = projection_for(rng, x.size());
    cases.push_back({"abs", [p](Graph&, std::span<const Var> v) { return p(abs(v[0])); }, {x}});
  }
  unary("sigmoid", {3, 4}, [](Var a) { return sigmoid(a); });
  unary("gelu", {3, 4}, [](Var a) { return gelu(a); });
  unary("softmax_rows", {3, 5}, [](Var a) { return softmax(a, 1); });
  unary("softmax_cols", {3, 5}, [](Var a) { return softmax(a, 0); });
  {
    const std::vector<std::uint8_t> keys{1, 1, 0, 1};
    unary("masked_softmax", {4, 4}, [keys](Var a) { return masked_softmax(a, keys, false); });
    unary("masked_softmax_causal", {4, 4}, [keys](Var a) { return masked_softmax(a, keys, true); });
  }
  {
    const Projection p = projection_for(rng, 12);
    cases.push_back({"layer_norm",
                     [p](Graph&, std::span<const Var> v) { return p(layer_norm(v[0], v[1], v[2])); },
                     {randn(rng, {3, 4}), randn(rng, {4}, 0.3, 1.0), randn(rng, {4}, 0.3)}});
  }
  {
    const std::vector<int> rows{2, 0, 2, 3};
    unary("gather_rows", {4, 3}, [rows](Var a) { return gather_rows(a, rows); });
  }
  unary("slice_rows", {5, 3}, [](Var a) { return slice_rows(a, 1, 3); });
  unary("slice_cols", {3, 5}, [](Var a) { return slice_cols(a, 2, 2); });
  binary("concat_rows", {2, 3}, {3, 3}, {5, 3}, [](Var a, Var b) {
    const std::vector<Var> parts{a, b};
    return concat_rows(parts);
  });
  binary("concat_cols", {3, 2}, {3, 4}, {3, 6}, [](Var a, Var b) {
    const std::vector<Var> parts{b, a};
    return concat_cols(parts);
  });
  unary("sum", {3, 4}, [](Var a) { return scale(sum(a), 0.5); });
  unary("mean", {3, 4}, [](Var a) { return scale(mean(a), 0.5); });
  unary("mean_rows", {4, 3}, [](Var a) { return mean_rows(a); });
  unary("max_rows", {4, 3}, [](Var a) { return max_rows(a); });
  {
    const std::vector<int> targets{1, 0, 4, 2};
    Tensor logits = randn(rng, {4, 5});
    cases.push_back({"nll_loss", [targets](Graph&, std::span<const Var> v) { return nll_loss(v[0], targets, 0); },
                     {logits}});
  }
  {
    const std::uint64_t mask_seed = rng.next_u64();
    unary("dropout", {3, 4}, [mask_seed](Var a) {
      Rng r(mask_seed);
      return dropout(a, 0.3, r);
    });
  }
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.encoder.vocab_size = 12;
  cfg.encoder.d_model = 8;
  cfg.encoder.n_layers = 1;
  cfg.encoder.n_heads = 2;
  cfg.encoder.ffn_mult = 2;
  cfg.encoder.max_len = 6;
  cfg.encoder.dropout = 0.0;
  cfg.bottleneck_heads = 2;
  cfg.decoder_layers = 1;
  return cfg;
}

/// Collects tensors in a fixed order and rebinds them from the graph inputs.
/// Tensors that are bound as constants rather than probed (see push_attention).
struct Packer {
  std::vector<Tensor>* inputs;
  Rng* rng;
  std::vector<Tensor> fixed;
  Tensor next(Shape shape, double scale, double offset = 0.0) {
    Tensor t = randn(*rng, std::move(shape), scale, offset);
    inputs->push_back(t);
    return t;
  }
  void next_fixed(Shape shape, double scale) { fixed.push_back(randn(*rng, std::move(shape), scale)); }
};

struct Cursor {
  std::span<const Var> vars;
  const std::vector<Tensor>* fixed = nullptr;
  std::size_t pos = 0;
  std::size_t fixed_pos = 0;
  Var take() { return vars[pos++]; }
  Var take_fixed() { return vars[0].graph->constant((*fixed)[fixed_pos++]); }
};

// The key bias adds q.bk to every score of a row, which softmax cancels: its
// gradient is identically zero and a relative error on it measures only
// rounding noise. It is held constant here and covered by its own test.
void push_attention(Packer& pk, std::size_t d) {
  pk.next({d, d}, 0.4);
  pk.next({d}, 0.1);
  pk.next({d, d}, 0.4);
  pk.next_fixed({d}, 0.1);
  for (int i = 0; i < 2; ++i) {
    pk.next({d, d}, 0.4);
    pk.next({d}, 0.1);
  }
}
AttentionVars take_attention(Cursor& c) {
  AttentionVars a;
  a.wq = c.take(), a.bq = c.take(), a.wk = c.take(), a.bk = c.take_fixed();
  a.wv = c.take(), a.bv = c.take(), a.wo = c.take(), a.bo = c.take();
  return a;
}
void push_ln(Packer& pk, std::size_t d) {
  pk.next({d}, 0.2, 1.0);
  pk.next({d}, 0.1);
}
LayerNormVars take_ln(Cursor& c) {
  LayerNormVars l;
  l.gamma = c.take(), l.beta = c.take();
  return l;
}
void push_ffn(Packer& pk, std::size_t d, std::size_t w) {
  pk.next({d, w}, 0.4);
  pk.next({w}, 0.1);
  pk.next({w, d}, 0.4);
  pk.next({d}, 0.1);
}
FeedForwardVars take_ffn(Cursor& c) {
  FeedForwardVars f;
  f.w1 = c.take(), f.b1 = c.take(), f.w2 = c.take(), f.b2 = c.take();
  return f;
}

void add_block_cases(std::vector<Case>& cases, Rng& rng) {
  const ModelConfig cfg = tiny_config();
  const auto& e = cfg.encoder;
  const std::size_t d = e.d_model;

  {
    // Two sequences, the second padded.
    std::vector<Tensor> inputs;
    Packer pk{&inputs, &rng, {}};
    pk.next({8, d}, 1.0);
    for (int i = 0; i < 3; ++i) pk.next({d, d}, 0.4);
    const Projection p = projection_for(rng, 2 * d);
    cases.push_back({"bottleneck",
                     [p](Graph&, std::span<const Var> v) {
                       const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 1, 0, 0};
                       const EncoderOutput h{v[0], 2, 4, mask};
                       const BottleneckVars b{v[1], v[2], v[3], 2};
                       return p(bottleneck_forward(b, h));
                     },
                     inputs});
  }
  {
    std::vector<Tensor> inputs;
    Packer pk{&inputs, &rng, {}};
    pk.next({5, d}, 1.0);
    pk.next({2, d}, 1.0);
    for (int i = 0; i < 3; ++i) pk.next({d, d}, 0.4);
    const Projection p = projection_for(rng, 5 * d);
    cases.push_back({"gated_cross_attention",
                     [p](Graph&, std::span<const Var> v) {
                       const std::vector<int> owner{0, 0, 0, 1, 1};
                       return p(gated_cross_attention(v[0], v[1], owner, GatedCrossVars{v[2], v[3], v[4]}));
                     },
                     inputs});
  }
  {
    std::vector<Tensor> inputs;
    Packer pk{&inputs, &rng, {}};
    pk.next({e.vocab_size, d}, 0.5);
    pk.next({e.max_len, d}, 0.5);
    push_attention(pk, d);
    push_ln(pk, d);
    push_ffn(pk, d, e.ffn_width());
    push_ln(pk, d);
    const std::vector<std::vector<int>> seqs{{1, 7, 9, 4, 2}, {1, 11, 8, 2}};
    const Batch batch = make_batch(seqs);
    const Projection p = projection_for(rng, batch.ids.size() * d);
    cases.push_back({"encoder_layer",
                     [p, batch, cfg, fixed = pk.fixed](Graph&, std::span<const Var> v) {
                       Cursor c{v, &fixed};
                       EncoderVars ev;
                       ev.tok_emb = c.take();
                       ev.pos_emb = c.take();
                       EncoderLayerVars layer;
                       layer.attn = take_attention(c);
                       layer.ln1 = take_ln(c);
                       layer.ffn = take_ffn(c);
                       layer.ln2 = take_ln(c);
                       ev.layers.push_back(layer);
                       return p(encoder_forward(ev, cfg.encoder, batch, false, nullptr).hidden);
                     },
                     inputs});
  }
  {
    std::vector<Tensor> inputs;
    Packer pk{&inputs, &rng, {}};
    pk.next({2, d}, 1.0);  // z
    pk.next({e.vocab_size, d}, 0.5);
    pk.next({e.max_len, d}, 0.5);
    push_attention(pk, d);
    push_ln(pk, d);
    for (int i = 0; i < 3; ++i) pk.next({d, d}, 0.4);
    push_ln(pk, d);
    push_ffn(pk, d, e.ffn_width());
    push_ln(pk, d);
    const std::vector<std::vector<int>> contents{{7, 9, 3}, {11, 8}};
    cases.push_back({"decoder_layer",
                     [contents, cfg, fixed = pk.fixed](Graph&, std::span<const Var> v) {
                       Cursor c{v, &fixed};
                       const Var z = c.take();
                       DecoderVars dv;
                       dv.tok_emb = c.take();
                       dv.pos_emb = c.take();
                       DecoderLayerVars layer;
                       layer.self_attn = take_attention(c);
                       layer.ln1 = take_ln(c);
                       layer.cross.g = c.take();
                       layer.cross.g_prime = c.take();
                       layer.cross.wv = c.take();
                       layer.ln2 = take_ln(c);
                       layer.ffn = take_ffn(c);
                       layer.ln3 = take_ln(c);
                       dv.layers.push_back(layer);
                       return reconstruction_loss(dv, cfg, z, contents, false, nullptr);
                     },
                     inputs});
  }
}

}  // namespace

GradCheckResult grad_check(const GradFn& f, const std::vector<Tensor>& inputs, double eps) {
  if (!(eps > 0.0)) throw NumericError("grad_check: eps must be positive");
  std::vector<Tensor> analytic;
  evaluate(f, inputs, &analytic);

  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (std::size_t k = 0; k < probe[i].size(); ++k) {
      const double saved = probe[i][k];
      probe[i][k] = saved + eps;
      const double up = evaluate(f, probe, nullptr);
      probe[i][k] = saved - eps;
      const double down = evaluate(f, probe, nullptr);
      probe[i][k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][k];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_rel_error || (i == 0 && k == 0)) {
        result.max_rel_error = err;
        result.worst_input = i;
        result.worst_index = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

std::vector<GradCase> run_gradient_suite(int seeds, double tolerance) {
  if (seeds < 1) throw NumericError("gradient suite: need at least one seed");
  std::vector<GradCase> out;
  for (int s = 0; s < seeds; ++s) {
    Rng rng = Rng(static_cast<std::uint64_t>(s)).derive(0x67726164ULL);
    std::vector<Case> cases;
    add_primitive_cases(cases, rng);
    add_block_cases(cases, rng);
    for (const auto& c : cases) {
      GradCase gc;
      gc.name = c.name + "/seed" + std::to_string(s);
      gc.result = grad_check(c.fn, c.inputs);
      gc.passed = gc.result.max_rel_error <= tolerance;
      out.push_back(std::move(gc));
    }
  }
  return out;
}

}  // namespace blab
