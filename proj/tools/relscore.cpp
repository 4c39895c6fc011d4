// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: synthetic data generation, vocabulary construction,
// training, evaluation, scoring and gate export. Every subcommand is
// reproducible from its inputs and seed; commands with an output directory
// echo their resolved configuration there.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "relscore/evaluator.hpp"
#include "relscore/synth.hpp"
#include "relscore/trainer.hpp"

using nlohmann::json;
using namespace relscore;

namespace {

// Exit codes: 0 success, 1 usage, 2 data/format, 3 numeric failure.
int guarded(const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << content;
  if (!out) throw IoError("failed writing: " + path);
}

json hyperparams_json(const Hyperparams& hp) {
  return json{{"embed_dim", hp.model.embed_dim},
              {"hidden_dim", hp.model.hidden_dim},
              {"feature_dim", hp.model.feature_dim},
              {"loss", hp.model.loss == LossKind::hinge ? "hinge" : "xent"},
              {"gating", hp.model.gating},
              {"margin", hp.model.margin},
              {"dropout", hp.model.dropout},
              {"batch_size", hp.batch_size},
              {"learning_rate", hp.learning_rate},
              {"beta1", hp.beta1},
              {"beta2", hp.beta2},
              {"epsilon", hp.epsilon},
              {"epochs", hp.epochs},
              {"seed", hp.seed},
              {"min_count", hp.min_count}};
}

void echo_config(const std::string& out_dir, const std::string& command,
                 json config) {
  config["command"] = command;
  std::filesystem::create_directories(out_dir);
  write_text(out_dir + "/config.json", config.dump(2) + "\n");
}

void check_feature_width(const Hyperparams& hp, const FeatureSet& features) {
  if (features.dim() != hp.model.feature_dim) {
    throw DimensionError(
        "checkpoint expects feature width " +
        std::to_string(hp.model.feature_dim) + ", features file has width " +
        std::to_string(features.dim()));
  }
}

struct TrainArgs {
  std::string captions, dev_captions, features, vocab, pretrained, out_dir;
  Hyperparams hp;
  std::string loss = "xent";
  std::string gating = "on";
  std::size_t seeds = 1;
};

void run_train(const TrainArgs& args) {
  Hyperparams hp = args.hp;
  hp.model.loss = args.loss == "hinge" ? LossKind::hinge : LossKind::xent;
  hp.model.gating = args.gating == "on";
  hp.validate();

  CaptionDataset train_set = load_captions(args.captions);
  CaptionDataset dev_set = load_captions(args.dev_captions);
  FeatureSet features = load_features(args.features);
  Vocabulary vocab = Vocabulary::load(args.vocab);
  check_feature_width(hp, features);

  echo_config(args.out_dir, "train",
              json{{"captions", args.captions},
                   {"dev_captions", args.dev_captions},
                   {"features", args.features},
                   {"vocab", args.vocab},
                   {"pretrained", args.pretrained},
                   {"out_dir", args.out_dir},
                   {"seeds", args.seeds},
                   {"hyperparams", hyperparams_json(hp)}});

  if (args.seeds == 1) {
    TrainResult result =
        train(train_set, dev_set, features, vocab, hp, args.pretrained);
    save_checkpoint(args.out_dir + "/checkpoint.bin", hp, vocab, result.params);
    write_text(args.out_dir + "/train.log", format_train_log(result.log));
    std::printf("trained %zu epochs, best dev %.4f at epoch %zu\n", hp.epochs,
                result.best_dev, result.best_epoch);
    std::printf("checkpoint: %s/checkpoint.bin\n", args.out_dir.c_str());
    return;
  }

  // Seed-averaged protocol: one run per seed, mean of the per-seed bests.
  SeedSweep sweep = train_seeds(train_set, dev_set, features, vocab, hp,
                                args.seeds, args.pretrained);
  std::string summary = "seed\tbest_epoch\tbest_dev\n";
  char buf[128];
  for (std::size_t k = 0; k < sweep.runs.size(); ++k) {
    Hyperparams run_hp = hp;
    run_hp.seed = hp.seed + k;
    std::string run_dir = args.out_dir + "/seed_" + std::to_string(run_hp.seed);
    std::filesystem::create_directories(run_dir);
    save_checkpoint(run_dir + "/checkpoint.bin", run_hp, vocab,
                    sweep.runs[k].params);
    write_text(run_dir + "/train.log", format_train_log(sweep.runs[k].log));
    std::snprintf(buf, sizeof(buf), "%llu\t%zu\t%.4f\n",
                  static_cast<unsigned long long>(run_hp.seed),
                  sweep.runs[k].best_epoch, sweep.runs[k].best_dev);
    summary += buf;
  }
  std::snprintf(buf, sizeof(buf), "mean\t-\t%.4f\n", sweep.mean_best_dev);
  summary += buf;
  write_text(args.out_dir + "/summary.tsv", summary);
  std::printf("%zu seeds, mean best dev %.4f\n", args.seeds,
              sweep.mean_best_dev);
  std::printf("summary: %s/summary.tsv\n", args.out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual-prompt relevance scoring"};
  app.require_subcommand(1);

  // ---- gen-synth ----
  auto* gen = app.add_subcommand(
      "gen-synth", "generate a synthetic caption/feature dataset");
  SynthConfig synth;
  std::string gen_out = "data";
  std::uint64_t pair_seed = 9;
  gen->add_option("--clusters", synth.clusters, "number of feature clusters");
  gen->add_option("--dim", synth.feature_dim, "image feature width");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--train", synth.n_train, "training pairs");
  gen->add_option("--dev", synth.n_dev, "dev pairs");
  gen->add_option("--test", synth.n_test, "test pairs");
  gen->add_option("--detail-pool", synth.detail_pool,
                  "shared detail directions");
  gen->add_option("--noise", synth.noise_sd, "feature noise stddev");
  gen->add_option("--pair-seed", pair_seed, "seed for negative eval pairs");
  gen->add_option("--out-dir", gen_out, "output directory")->required();

  // ---- build-vocab ----
  auto* bv = app.add_subcommand("build-vocab",
                                "build a vocabulary from a captions file");
  std::string bv_captions, bv_out;
  int bv_min_count = 2;
  bv->add_option("--captions", bv_captions, "captions tsv")->required();
  bv->add_option("--min-count", bv_min_count,
                 "keep tokens seen at least this often");
  bv->add_option("--out", bv_out, "vocabulary output path")->required();

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train a relevance model");
  TrainArgs ta;
  ta.hp.epochs = 30;  // desk-scale default; the paper protocol ran 300
  tr->add_option("--captions", ta.captions, "training captions tsv")->required();
  tr->add_option("--dev-captions", ta.dev_captions, "dev captions tsv")->required();
  tr->add_option("--features", ta.features, "image features tsv")->required();
  tr->add_option("--vocab", ta.vocab, "vocabulary file")->required();
  tr->add_option("--pretrained", ta.pretrained, "pretrained word vectors");
  tr->add_option("--out-dir", ta.out_dir, "output directory")->required();
  tr->add_option("--loss", ta.loss, "loss variant")
      ->check(CLI::IsMember({"hinge", "xent"}));
  tr->add_option("--gating", ta.gating, "gating on|off")
      ->check(CLI::IsMember({"on", "off"}));
  tr->add_option("--dropout", ta.hp.model.dropout, "dropout probability");
  tr->add_option("--margin", ta.hp.model.margin, "hinge margin");
  tr->add_option("--embed-dim", ta.hp.model.embed_dim, "embedding width");
  tr->add_option("--hidden-dim", ta.hp.model.hidden_dim, "LSTM hidden width");
  tr->add_option("--feature-dim", ta.hp.model.feature_dim,
                 "image feature width");
  tr->add_option("--batch-size", ta.hp.batch_size, "pairs per batch");
  tr->add_option("--lr", ta.hp.learning_rate, "initial ADAM learning rate");
  tr->add_option("--epochs", ta.hp.epochs, "training epochs");
  tr->add_option("--seed", ta.hp.seed, "run seed");
  tr->add_option("--seeds", ta.seeds, "train this many consecutive seeds and report the mean");
  tr->add_option("--min-count", ta.hp.min_count,
                 "vocabulary min count (recorded in the checkpoint)");

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "run an evaluation protocol");
  std::string ev_ckpt, ev_features, ev_mode = "pairs", ev_pairs, ev_answers,
              ev_captions, ev_out;
  std::size_t ev_k = 50, ev_trials = 1000;
  std::uint64_t ev_seed = 1;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--features", ev_features, "image features tsv")->required();
  ev->add_option("--mode", ev_mode, "pairs|rank6")
      ->check(CLI::IsMember({"pairs", "rank6"}));
  ev->add_option("--pairs", ev_pairs, "labeled pairs tsv (pairs mode)");
  ev->add_option("--answers", ev_answers, "answers tsv (pairs mode)");
  ev->add_option("--captions", ev_captions, "captions tsv (rank6 mode)");
  ev->add_option("--k", ev_k, "precision@k cutoff");
  ev->add_option("--trials", ev_trials, "ranking trials (rank6 mode)");
  ev->add_option("--seed", ev_seed, "sampling seed (rank6 mode)");
  ev->add_option("--out-dir", ev_out, "write report files here");

  // ---- score ----
  auto* sc = app.add_subcommand("score", "score answer/image pairs");
  std::string sc_ckpt, sc_answers, sc_pairs, sc_features, sc_out;
  sc->add_option("--checkpoint", sc_ckpt, "model checkpoint")->required();
  sc->add_option("--answers", sc_answers, "answers tsv")->required();
  sc->add_option("--pairs", sc_pairs, "answer/image pairs tsv (label optional)")
      ->required();
  sc->add_option("--features", sc_features, "image features tsv")->required();
  sc->add_option("--out", sc_out, "write scored lines here (default stdout)");

  // ---- export-gates ----
  auto* eg = app.add_subcommand("export-gates",
                                "write per-sentence gate weight rows");
  std::string eg_ckpt, eg_answers, eg_out;
  eg->add_option("--checkpoint", eg_ckpt, "model checkpoint")->required();
  eg->add_option("--answers", eg_answers, "answers tsv")->required();
  eg->add_option("--out", eg_out, "gates output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (gen->parsed()) {
    return guarded([&] {
      SynthData data = generate_synthetic(synth);
      write_synthetic(data, gen_out, pair_seed);
      echo_config(gen_out, "gen-synth",
                  json{{"clusters", synth.clusters},
                       {"dim", synth.feature_dim},
                       {"seed", synth.seed},
                       {"train", synth.n_train},
                       {"dev", synth.n_dev},
                       {"test", synth.n_test},
                       {"detail_pool", synth.detail_pool},
                       {"noise", synth.noise_sd},
                       {"pair_seed", pair_seed},
                       {"out_dir", gen_out}});
      std::printf("wrote %s/{train,dev,test,features,answers,pairs}.tsv\n",
                  gen_out.c_str());
    });
  }

  if (bv->parsed()) {
    return guarded([&] {
      CaptionDataset ds = load_captions(bv_captions);
      Vocabulary vocab = build_vocab(ds, bv_min_count);
      vocab.save(bv_out);
      std::printf("vocabulary: %zu tokens -> %s\n", vocab.size(),
                  bv_out.c_str());
    });
  }

  if (tr->parsed()) {
    return guarded([&] { run_train(ta); });
  }

  if (ev->parsed()) {
    return guarded([&] {
      LoadedModel model = load_checkpoint(ev_ckpt);
      FeatureSet features = load_features(ev_features);
      check_feature_width(model.hp, features);
      if (ev_mode == "pairs") {
        if (ev_pairs.empty() || ev_answers.empty()) {
          throw ParameterError("pairs mode needs --pairs and --answers");
        }
        std::vector<Answer> answers = load_answers(ev_answers);
        std::vector<EvalPairRecord> pairs = load_pairs(ev_pairs, true);
        EvalReport report = evaluate_pairs(model.params, model.hp.model,
                                           model.vocab, answers, pairs,
                                           features, ev_k);
        std::printf("%s", format_report(report).c_str());
        if (!ev_out.empty()) {
          echo_config(ev_out, "evaluate",
                      json{{"checkpoint", ev_ckpt},
                           {"features", ev_features},
                           {"mode", ev_mode},
                           {"pairs", ev_pairs},
                           {"answers", ev_answers},
                           {"k", ev_k}});
          write_text(ev_out + "/report.txt", format_report(report));
          write_text(ev_out + "/report.kv", report_kv(report));
        }
      } else {
        if (ev_captions.empty()) {
          throw ParameterError("rank6 mode needs --captions");
        }
        CaptionDataset captions = load_captions(ev_captions);
        Rng rng(ev_seed);
        double acc = rank6_accuracy(model.params, model.hp.model, model.vocab,
                                    captions, features, ev_trials, rng);
        std::printf("rank6_accuracy=%.4f\ntrials=%zu\n", acc, ev_trials);
        if (!ev_out.empty()) {
          echo_config(ev_out, "evaluate",
                      json{{"checkpoint", ev_ckpt},
                           {"features", ev_features},
                           {"mode", ev_mode},
                           {"captions", ev_captions},
                           {"trials", ev_trials},
                           {"seed", ev_seed}});
          char buf[64];
          std::snprintf(buf, sizeof(buf), "rank6_accuracy=%.4f\ntrials=%zu\n",
                        acc, ev_trials);
          write_text(ev_out + "/report.kv", buf);
        }
      }
    });
  }

  if (sc->parsed()) {
    return guarded([&] {
      LoadedModel model = load_checkpoint(sc_ckpt);
      FeatureSet features = load_features(sc_features);
      check_feature_width(model.hp, features);
      std::vector<Answer> answers = load_answers(sc_answers);
      std::vector<EvalPairRecord> pairs = load_pairs(sc_pairs, false);
      std::vector<ScoredPair> scored = score_pairs(
          model.params, model.hp.model, model.vocab, answers, pairs, features);
      std::string out;
      char buf[256];
      for (const ScoredPair& p : scored) {
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%.9g\n", p.answer_id.c_str(),
                      p.image_id.c_str(), p.score);
        out += buf;
      }
      if (sc_out.empty()) {
        std::fputs(out.c_str(), stdout);
      } else {
        write_text(sc_out, out);
      }
    });
  }

  if (eg->parsed()) {
    return guarded([&] {
      LoadedModel model = load_checkpoint(eg_ckpt);
      std::vector<Answer> answers = load_answers(eg_answers);
      export_gates(model.params, model.hp.model, model.vocab, answers, eg_out);
      std::printf("gates: %zu answers -> %s\n", answers.size(), eg_out.c_str());
    });
  }

  return 0;
}
