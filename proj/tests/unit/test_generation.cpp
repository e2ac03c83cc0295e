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
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "blab/evaluation.hpp"
#include "blab/generation.hpp"

using namespace blab;

TEST_CASE("greedy decoding emits no framing tokens and respects the length cap") {
  const Autobot m = blab::test::tiny_model();
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Tensor z = blab::test::random_tensor({8}, rng, 3.0);
    const auto ids = greedy_decode(m, z);
    CHECK(ids.size() <= m.config.encoder.max_len - 1);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      CHECK(ids[t] != kPad);
      CHECK(ids[t] != kBos);
      CHECK(ids[t] != kCls);
      CHECK(ids[t] != kSep);
      CHECK(ids[t] != kMask);
      if (ids[t] == kEos) CHECK(t + 1 == ids.size());
    }
    CHECK(greedy_decode(m, z, 3).size() <= 3);
    CHECK(greedy_decode(m, z) == ids);
  }
}

TEST_CASE("steering vector antisymmetry is bit-exact") {
  const Autobot m = blab::test::tiny_model();
  const std::vector<std::string> pos{"the soup was great", "the cat was great"};
  const std::vector<std::string> neg{"the soup was awful", "the dog was awful", "a dog sat loudly"};
  const SteeringVector ab = compute_steering_vector(m, pos, neg);
  const SteeringVector ba = compute_steering_vector(m, neg, pos);
  REQUIRE(ab.v.size() == 8);
  CHECK(ab.pos_count == 2);
  CHECK(ab.neg_count == 3);
  for (std::size_t i = 0; i < ab.v.size(); ++i) CHECK(ab.v[i] == -ba.v[i]);
  CHECK(compute_steering_vector(m, pos, neg, 1).pos_count == 1);
  CHECK_THROWS(compute_steering_vector(m, pos, {}));
}

TEST_CASE("transfer at alpha 0 reproduces reconstruction exactly") {
  const Autobot m = blab::test::tiny_model();
  const SteeringVector v = compute_steering_vector(m, std::vector<std::string>{"the soup was great"},
                                                   std::vector<std::string>{"the soup was awful"});
  for (const auto& s : blab::test::tiny_corpus()) {
    const TransferResult r = transfer(m, s, v, 0.0);
    CHECK(r.output == reconstruct(m, s));
    CHECK(blab::test::bit_equal(r.z_shifted, sentence_vector(m, s)));
    CHECK(r.z_norm_before == r.z_norm_after);
  }
  const Tensor z = sentence_vector(m, "a cat sat quietly");
  const Tensor moved = shift(z, v.v, 2.0);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(moved[i] == z[i] + 2.0 * v.v[i]);
}

TEST_CASE("interpolation endpoints decode the endpoint vectors") {
  const Autobot m = blab::test::tiny_model();
  const auto path = interpolate(m, "the cat sat there", "a dog sat loudly", 5);
  REQUIRE(path.size() == 5);
  CHECK(path.front() == reconstruct(m, "the cat sat there"));
  CHECK(path.back() == reconstruct(m, "a dog sat loudly"));
  CHECK_THROWS(interpolate(m, "a", "b", 1));
}

TEST_CASE("steering vectors survive a JSON round-trip") {
  const Autobot m = blab::test::tiny_model();
  std::map<std::string, SteeringVector> vs;
  vs["s"] = compute_steering_vector(m, std::vector<std::string>{"the soup was great"},
                                    std::vector<std::string>{"the soup was awful"}, 100, "unit");
  const auto path = std::filesystem::temp_directory_path() / "blab_vectors.json";
  save_steering_vectors(path, vs);
  const auto back = load_steering_vectors(path);
  REQUIRE(back.count("s") == 1);
  CHECK(blab::test::bit_equal(back.at("s").v, vs["s"].v));
  CHECK(back.at("s").source == "unit");
  std::filesystem::remove(path);
}

TEST_CASE("alpha sweep reports one row per alpha with the alpha-0 self-BLEU of reconstructions") {
  const Autobot m = blab::test::tiny_model();
  const std::vector<LabeledText> data{{"pos", "the soup was great"}, {"neg", "the soup was awful"},
                                      {"pos", "the cat was great"},  {"neg", "the dog was awful"},
                                      {"other", "a cat sat quietly"}};
  const BowClassifier judge = train_transfer_classifier(data);
  const SteeringVector v = compute_steering_vector(m, std::vector<std::string>{"the soup was great"},
                                                   std::vector<std::string>{"the soup was awful"});
  const std::vector<double> alphas{0.0, 1.0};
  const auto rows = alpha_sweep(m, data, v, alphas, judge);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].n == 4);
  std::vector<std::string> recon, inputs;
  for (const auto& d : data) {
    if (d.label == "other") continue;
    recon.push_back(reconstruct(m, d.text));
    inputs.push_back(d.text);
  }
  const BleuConfig bleu;
  CHECK(rows[0].self_bleu == self_bleu(recon, inputs, bleu));
  const Report rep = sweep_report(rows);
  CHECK(rep.csv().rfind("alpha,accuracy,self_bleu,n\n", 0) == 0);
}

TEST_CASE("reconstruction score of an untrained model is within [0, 1]") {
  const Autobot m = blab::test::tiny_model();
  const auto corpus = blab::test::tiny_corpus();
  const ReconstructionScore s = reconstruction_score(m, corpus);
  CHECK(s.sentences == corpus.size());
  CHECK(s.token_accuracy >= 0.0);
  CHECK(s.token_accuracy <= 1.0);
}
