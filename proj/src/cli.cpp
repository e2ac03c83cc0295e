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

#include "blab/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "blab/checkpoint.hpp"
#include "blab/gradcheck.hpp"
#include "blab/pipeline.hpp"

namespace blab::cli {

namespace {

namespace fs = std::filesystem;

/// Raised for bad command-line input discovered after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config with flat dotted keys");
  sub->add_option("--set", c.overrides, "Override a config key: key=value (repeatable)");
  sub->add_option("--seed", c.seed, "Seed for every random stream");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.sync();
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

fs::path output_dir_of(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

std::vector<std::string> gather_texts(const std::vector<std::string>& texts, const std::string& input) {
  std::vector<std::string> out = texts;
  if (!input.empty()) {
    for (auto& line : read_lines(input)) out.push_back(std::move(line));
  }
  if (out.empty()) throw UsageError("give --text or --input");
  return out;
}

Vocabulary load_vocab_file(const fs::path& path) {
  auto tokens = read_lines(path);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::string format_vector(const Tensor& z) {
  std::ostringstream s;
  s << std::setprecision(9) << '[';
  for (std::size_t i = 0; i < z.size(); ++i) s << (i ? ", " : "") << z[i];
  s << ']';
  return s.str();
}

const SteeringVector& pick_vector(const std::map<std::string, SteeringVector>& vectors, const std::string& name) {
  auto it = vectors.find(name);
  if (it == vectors.end()) throw UsageError("no steering vector named '" + name + "'");
  return it->second;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sentence bottleneck autoencoder toolkit"};
  app.name("blab");
  app.require_subcommand(1);

  Common common;
  std::string out_dir, out_file, corpus, vocab_path, model_path, vectors_path, name = "sentiment", input, data,
      eval_data, classifier_data, pairs_path, finetune_pairs, eval_pairs, pooling = "beta", positive = "pos",
      negative = "neg";
  std::vector<std::string> texts;
  std::size_t pair_count = 512, steer_lines = 0, seeds = 5;
  double alpha = 0.0, tolerance = 1e-4;
  bool published = false, head_only = false;

  auto* gen = app.add_subcommand("gen-corpus", "Write the templated toy corpus and pair files");
  gen->add_option("--out-dir", out_dir, "Output directory")->required();
  gen->add_option("--pairs", pair_count, "Number of pairs per pair file");

  auto* bv = app.add_subcommand("build-vocab", "Build a vocabulary from a corpus");
  bv->add_option("--corpus", corpus, "Plain-text corpus, one sentence per line")->required();
  bv->add_option("--out", out_file, "Vocabulary file, one token per line")->required();

  auto* pre = app.add_subcommand("pretrain", "MLM-pretrain an encoder and assemble a fresh autoencoder");
  pre->add_option("--corpus", corpus, "Plain-text corpus")->required();
  pre->add_option("--vocab", vocab_path, "Vocabulary file (built from the corpus if absent)");
  pre->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Denoising autoencoder training with a frozen encoder");
  tr->add_option("--model", model_path, "Input checkpoint")->required();
  tr->add_option("--corpus", corpus, "Plain-text corpus")->required();
  tr->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* enc = app.add_subcommand("encode", "Print sentence vectors");
  enc->add_option("--model", model_path, "Checkpoint")->required();
  enc->add_option("--text", texts, "Sentence (repeatable)");
  enc->add_option("--input", input, "File with one sentence per line");
  enc->add_option("--pooling", pooling, "beta, mean, max or cls");

  auto* rec = app.add_subcommand("reconstruct", "Encode and greedily decode sentences");
  rec->add_option("--model", model_path, "Checkpoint")->required();
  rec->add_option("--text", texts, "Sentence (repeatable)");
  rec->add_option("--input", input, "File with one sentence per line");

  auto* st = app.add_subcommand("steer", "Compute a steering vector from labelled sentences");
  st->add_option("--model", model_path, "Checkpoint")->required();
  st->add_option("--data", data, "Labelled TSV")->required();
  st->add_option("--out", out_file, "Steering vector JSON (entries are merged)")->required();
  st->add_option("--name", name, "Vector name");
  st->add_option("--positive", positive, "Label added by the vector");
  st->add_option("--negative", negative, "Label removed by the vector");
  st->add_option("--steer-lines", steer_lines, "Use only the first N rows (0 = all)");

  auto* tf = app.add_subcommand("transfer", "Shift a sentence vector and decode it");
  tf->add_option("--model", model_path, "Checkpoint")->required();
  tf->add_option("--vectors", vectors_path, "Steering vector JSON")->required();
  tf->add_option("--name", name, "Vector name");
  tf->add_option("--alpha", alpha, "Multiple of the vector")->required();
  tf->add_option("--text", texts, "Sentence (repeatable)");
  tf->add_option("--input", input, "File with one sentence per line");

  auto* sw = app.add_subcommand("sweep", "Transfer accuracy and self-BLEU over the alpha grid");
  sw->add_option("--model", model_path, "Checkpoint")->required();
  sw->add_option("--vectors", vectors_path, "Steering vector JSON")->required();
  sw->add_option("--name", name, "Vector name");
  sw->add_option("--eval", eval_data, "Labelled TSV to transfer")->required();
  sw->add_option("--classifier-data", classifier_data, "Labelled TSV for the judge classifier")->required();
  sw->add_option("--positive", positive, "Positive label");
  sw->add_option("--negative", negative, "Negative label");
  sw->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* sts = app.add_subcommand("eval-sts", "Spearman of cosine similarity against scored pairs");
  sts->add_option("--model", model_path, "Checkpoint")->required();
  sts->add_option("--pairs", pairs_path, "Scored pairs TSV")->required();
  sts->add_option("--pooling", pooling, "beta, mean, max or cls");

  auto* pool = app.add_subcommand("eval-pooling", "Siamese finetuning once per pooling mode");
  pool->add_option("--model", model_path, "Checkpoint")->required();
  pool->add_option("--finetune-pairs", finetune_pairs, "Labelled pairs TSV")->required();
  pool->add_option("--eval-pairs", eval_pairs, "Scored pairs TSV")->required();
  pool->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* cls = app.add_subcommand("finetune-cls", "Train a sentence classifier over z");
  cls->add_option("--model", model_path, "Checkpoint")->required();
  cls->add_option("--data", data, "Labelled TSV")->required();
  cls->add_option("--out-dir", out_dir, "Output directory")->required();
  cls->add_flag("--head-only", head_only, "Keep encoder and bottleneck frozen");

  auto* par = app.add_subcommand("params", "Parameter-count report");
  par->add_flag("--paper,--published", published, "Use the published base configuration");
  par->add_option("--vocab", vocab_path, "Vocabulary file (default: toy corpus vocabulary)");

  auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  gc->add_option("--seeds", seeds, "Number of seeds");
  gc->add_option("--tolerance", tolerance, "Maximum relative error");

  auto* ex = app.add_subcommand("explore", "Interactive latent-space session on standard input");
  ex->add_option("--model", model_path, "Checkpoint")->required();
  ex->add_option("--vectors", vectors_path, "Steering vector JSON");

  for (auto* sub : app.get_subcommands({})) add_common(sub, common);

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // Subcommand --help.
      for (auto* sub : app.get_subcommands()) {
        out << sub->help();
        return kExitOk;
      }
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const RunConfig cfg = resolve(common);

    if (sub == gen) {
      const ToyCorpusSpec spec = cfg.corpus_spec();
      const auto corpus_rows = generate_toy_corpus(spec);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      write_lines(dir / "corpus.txt", texts_of(corpus_rows));
      write_labeled_tsv(dir / "labeled.tsv", corpus_rows);
      write_pairs_tsv(dir / "scored_pairs.tsv",
                      generate_toy_scored_pairs(spec, pair_count, Rng(cfg.seed).derive(0x73636f72ULL).next_u64()));
      write_pairs_tsv(dir / "polarity_pairs.tsv",
                      generate_toy_polarity_pairs(spec, pair_count, Rng(cfg.seed).derive(0x706f6c61ULL).next_u64()));
      write_resolved_config(cfg, dir);
      out << "wrote " << corpus_rows.size() << " sentences and " << pair_count << " pairs per file to "
          << dir.string() << "\n";
    } else if (sub == bv) {
      const auto vocab = build_vocab(read_lines(corpus), cfg.vocab_min_count);
      write_lines(out_file, vocab.tokens());
      write_resolved_config(cfg, output_dir_of(out_file));
      out << "vocabulary of " << vocab.size() << " tokens\n";
    } else if (sub == pre) {
      const auto lines = read_lines(corpus);
      const Vocabulary vocab =
          vocab_path.empty() ? build_vocab(lines, cfg.vocab_min_count) : load_vocab_file(vocab_path);
      std::vector<LossRecord> log;
      const Autobot model = pretrain_autobot(cfg, lines, vocab, &log, [&](const LossRecord& r) {
        out << "pretrain step " << r.step << " lr " << r.lr << " loss " << r.loss << "\n";
      });
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      save_checkpoint(model, dir / "pretrained.abot");
      write_loss_log(dir / "pretrain_loss.csv", log);
      write_resolved_config(cfg, dir);
    } else if (sub == tr) {
      Autobot model = load_checkpoint(model_path);
      const auto lines = read_lines(corpus);
      const TrainResult result = train_autoencoder(model, lines, cfg.train_config(), cfg.freeze,
                                                   [&](const LossRecord& r) {
                                                     out << "train step " << r.step << " lr " << r.lr << " loss "
                                                         << r.loss;
                                                     if (r.eval_metric >= 0) out << " heldout_acc " << r.eval_metric;
                                                     out << "\n";
                                                   });
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      save_checkpoint(model, dir / "model.abot");
      write_loss_log(dir / "train_loss.csv", result.log);
      nlohmann::ordered_json summary;
      summary["heldout_sentences"] = result.heldout.sentences;
      summary["heldout_token_accuracy"] = result.heldout.token_accuracy;
      summary["heldout_exact_match"] = result.heldout.exact_match;
      write_text(dir / "train_summary.json", summary.dump(2) + "\n");
      write_resolved_config(cfg, dir);
      out << "heldout token accuracy " << result.heldout.token_accuracy << " exact match "
          << result.heldout.exact_match << "\n";
    } else if (sub == enc) {
      const Autobot model = load_checkpoint(model_path);
      const auto lines = gather_texts(texts, input);
      const Tensor z = sentence_vectors(model, lines, parse_pooling(pooling));
      for (std::size_t r = 0; r < z.rows(); ++r) {
        Tensor row({z.cols()});
        for (std::size_t c = 0; c < z.cols(); ++c) row[c] = z(r, c);
        out << format_vector(row) << "\n";
      }
    } else if (sub == rec) {
      const Autobot model = load_checkpoint(model_path);
      for (const auto& t : gather_texts(texts, input)) out << reconstruct(model, t) << "\n";
    } else if (sub == st) {
      const Autobot model = load_checkpoint(model_path);
      const auto rows = load_labeled_tsv(data);
      const auto split = steering_split(rows, steer_lines == 0 ? rows.size() : steer_lines, positive, negative);
      std::map<std::string, SteeringVector> vectors;
      if (fs::exists(out_file)) vectors = load_steering_vectors(out_file);
      vectors[name] = compute_steering_vector(model, split.positive, split.negative, cfg.steer_max_per_class,
                                              positive + " minus " + negative + " from " + data);
      save_steering_vectors(out_file, vectors);
      write_resolved_config(cfg, output_dir_of(out_file));
      out << "vector '" << name << "' from " << vectors[name].pos_count << " " << positive << " and "
          << vectors[name].neg_count << " " << negative << " sentences\n";
    } else if (sub == tf) {
      const Autobot model = load_checkpoint(model_path);
      const auto vectors = load_steering_vectors(vectors_path);
      const SteeringVector& v = pick_vector(vectors, name);
      for (const auto& t : gather_texts(texts, input)) out << transfer(model, t, v, alpha).output << "\n";
    } else if (sub == sw) {
      const Autobot model = load_checkpoint(model_path);
      const auto vectors = load_steering_vectors(vectors_path);
      const auto judge = train_transfer_classifier(load_labeled_tsv(classifier_data), cfg.classifier_epochs,
                                                   cfg.classifier_lr);
      const auto rows = alpha_sweep(model, load_labeled_tsv(eval_data), pick_vector(vectors, name),
                                    cfg.sweep_alphas, judge, positive, negative, cfg.bleu);
      Report report = sweep_report(rows);
      report.notes.push_back("self_bleu is corpus-level BLEU of outputs against their inputs");
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      report.write(dir / "sweep.csv");
      write_resolved_config(cfg, dir);
      out << report.csv();
    } else if (sub == sts) {
      const Autobot model = load_checkpoint(model_path);
      const auto pairs = load_pairs_tsv(pairs_path, PairKind::scored);
      out << "spearman " << std::setprecision(9) << sts_eval(model, pairs, parse_pooling(pooling)) << "\n";
    } else if (sub == pool) {
      const Autobot model = load_checkpoint(model_path);
      const auto rows = pooling_ablation(model, load_pairs_tsv(finetune_pairs, PairKind::labeled),
                                         load_pairs_tsv(eval_pairs, PairKind::scored), cfg.finetune_config());
      const Report report = pooling_report(rows);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      report.write(dir / "pooling.csv");
      write_resolved_config(cfg, dir);
      out << report.csv();
    } else if (sub == cls) {
      const Autobot model = load_checkpoint(model_path);
      const auto rows = load_labeled_tsv(data);
      const FinetuneResult r = classifier_finetune(model, rows, {}, cfg.finetune_config(), head_only);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      save_checkpoint(r.model, dir / "classifier.abot");
      write_loss_log(dir / "finetune_loss.csv", r.log);
      write_resolved_config(cfg, dir);
      out << "train accuracy " << r.train_accuracy << "\n";
    } else if (sub == par) {
      ModelConfig mc = cfg.model;
      if (published) {
        mc = published_base_config();
      } else if (!vocab_path.empty()) {
        mc.encoder.vocab_size = load_vocab_file(vocab_path).size();
      } else {
        mc.encoder.vocab_size = build_vocab(texts_of(generate_toy_corpus(cfg.corpus_spec())), cfg.vocab_min_count).size();
      }
      out << count_added_params(mc).render();
    } else if (sub == gc) {
      if (seeds == 0) throw UsageError("--seeds must be positive");
      const auto cases = run_gradient_suite(static_cast<int>(seeds), tolerance);
      bool ok = true;
      for (const auto& c : cases) {
        out << std::left << std::setw(32) << c.name << " " << std::scientific << std::setprecision(3)
            << c.result.max_rel_error << std::defaultfloat << (c.passed ? "  ok" : "  FAIL") << "\n";
        ok = ok && c.passed;
      }
      out << (ok ? "all gradients within " : "gradient check failed at tolerance ") << tolerance << "\n";
      return ok ? kExitOk : kExitRuntime;
    } else if (sub == ex) {
      const Autobot model = load_checkpoint(model_path);
      std::map<std::string, SteeringVector> vectors;
      if (!vectors_path.empty()) vectors = load_steering_vectors(vectors_path);
      explore(model, vectors, in, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace blab::cli
