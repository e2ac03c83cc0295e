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
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "blab/checkpoint.hpp"
#include "blab/cli.hpp"
#include "blab/run_config.hpp"

using namespace blab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "blab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("blab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("run config rejects unknown keys and bad values before any work") {
  RunConfig cfg;
  CHECK_THROWS_AS(set_run_config_value(cfg, "train.stepz", "5"), ConfigError);
  CHECK_THROWS_AS(set_run_config_value(cfg, "train.steps", "\"many\""), ConfigError);
  apply_override(cfg, "train.steps=7");
  CHECK(cfg.train.steps == 7);
  apply_override(cfg, "bleu.smoothing=add_epsilon");
  CHECK(cfg.bleu.smoothing == BleuSmoothing::add_epsilon);
  apply_override(cfg, "sweep.alphas=[0, 2]");
  CHECK(cfg.sweep_alphas == std::vector<double>{0, 2});
  CHECK_THROWS_AS(apply_override(cfg, "nonsense"), ConfigError);
  cfg.model.encoder.n_heads = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("resolved config lists every key and reloads to the same values") {
  RunConfig cfg;
  cfg.seed = 9;
  cfg.sync();
  cfg.train.steps = 11;
  const fs::path dir = scratch("cfg");
  write_resolved_config(cfg, dir);
  const auto j = nlohmann::json::parse(std::ifstream(dir / "config.resolved.json"));
  CHECK(j.size() == run_config_keys().size());
  const RunConfig back = load_run_config(dir / "config.resolved.json");
  CHECK(back.seed == 9);
  CHECK(back.train.steps == 11);
  CHECK(back.train_config().seed == 9);
  CHECK(resolved_config_json(back) == resolved_config_json(cfg));
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  CHECK(run_cli({"train", "--help"}).code == cli::kExitOk);
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  const auto bad = run_cli({"params", "--set", "nope=1"});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("nope") != std::string::npos);
  CHECK(run_cli({"reconstruct", "--model", "/nonexistent.abot", "--text", "x"}).code == cli::kExitRuntime);
}

TEST_CASE("params prints exact counts and the published reference") {
  const auto paper = run_cli({"params", "--paper"});
  REQUIRE(paper.code == 0);
  CHECK(paper.out.find("bottleneck_params=1769472") != std::string::npos);
  CHECK(paper.out.find("127M") != std::string::npos);
  CHECK(paper.out.find("discrepancy") != std::string::npos);
  const auto toy = run_cli({"params"});
  CHECK(toy.out.find("bottleneck_params=3072") != std::string::npos);
}

TEST_CASE("gen-corpus writes the data files and the resolved config") {
  const fs::path dir = scratch("gen");
  const auto r = run_cli({"gen-corpus", "--out-dir", dir.string(), "--pairs", "20", "--set", "corpus.count=40"});
  REQUIRE(r.code == 0);
  for (const char* f : {"corpus.txt", "labeled.tsv", "scored_pairs.tsv", "polarity_pairs.tsv", "config.resolved.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  CHECK(read_lines(dir / "corpus.txt").size() == 40);
  CHECK(load_pairs_tsv(dir / "scored_pairs.tsv", PairKind::scored).size() == 20);
  fs::remove_all(dir);
}

TEST_CASE("reconstruct, steer, transfer and explore work on a saved model") {
  const fs::path dir = scratch("model");
  const Autobot m = blab::test::tiny_model();
  save_checkpoint(m, dir / "m.abot");
  const auto rec = run_cli({"reconstruct", "--model", (dir / "m.abot").string(), "--text", "the cat sat"});
  REQUIRE(rec.code == 0);
  CHECK(rec.out == reconstruct(m, "the cat sat") + "\n");

  std::vector<LabeledText> rows{{"pos", "the soup was great"}, {"neg", "the soup was awful"},
                                {"pos", "the cat was great"},  {"neg", "the dog was awful"}};
  write_labeled_tsv(dir / "l.tsv", rows);
  const auto st = run_cli({"steer", "--model", (dir / "m.abot").string(), "--data", (dir / "l.tsv").string(),
                           "--out", (dir / "v.json").string(), "--name", "mood"});
  REQUIRE(st.code == 0);
  CHECK(load_steering_vectors(dir / "v.json").count("mood") == 1);

  const auto tf = run_cli({"transfer", "--model", (dir / "m.abot").string(), "--vectors", (dir / "v.json").string(),
                           "--name", "mood", "--alpha", "0", "--text", "the cat sat"});
  REQUIRE(tf.code == 0);
  CHECK(tf.out == rec.out);
  CHECK(run_cli({"transfer", "--model", (dir / "m.abot").string(), "--vectors", (dir / "v.json").string(), "--name",
                 "absent", "--alpha", "1", "--text", "x"})
            .code == cli::kExitUsage);

  const auto ex = run_cli({"explore", "--model", (dir / "m.abot").string(), "--vectors", (dir / "v.json").string()},
                          "dec\nenc the cat sat\nadd mood 1\nadd nothing 1\nreset\nbogus\nquit\nenc ignored\n");
  REQUIRE(ex.code == 0);
  CHECK(ex.out.find("> dec\n  no current vector") != std::string::npos);
  CHECK(ex.out.find("> enc the cat sat\n  norm ") != std::string::npos);
  CHECK(ex.out.find("  cleared") != std::string::npos);
  CHECK(ex.out.find("enc ignored") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck subcommand succeeds") {
  const auto r = run_cli({"gradcheck", "--seeds", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all gradients within") != std::string::npos);
}
