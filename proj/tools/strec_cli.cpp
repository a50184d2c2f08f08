// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// strec command-line tool.
//
//   strec recognize --checkpoint M.ckpt IMAGE...
//   strec train --train T.tsv [--val V.tsv] [--config F] [--key=value...]
//   strec evaluate --checkpoint M.ckpt MANIFEST... [--normalization exact]
//   strec generate-data --count N --out DIR [--data.seed=...]
//   strec analyze-lexicon MANIFEST [--plot hist.png]
//   strec ablate loss|rectification --train T.tsv --eval E.tsv... [--key=value...]
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.
// Results go to stdout as tab-separated lines; diagnostics go to stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "strec/checkpoint.hpp"
#include "strec/config.hpp"
#include "strec/data.hpp"
#include "strec/errors.hpp"
#include "strec/image.hpp"
#include "strec/trainer.hpp"

namespace {

using namespace strec;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct ConfigSource {
  std::string file;
  std::vector<std::string> overrides;
};

Config effective_config(const ConfigSource& src) {
  Config c = Config::defaults();
  if (!src.file.empty()) c.apply_file(src.file);
  c.apply_overrides(src.overrides);
  std::cerr << "# effective config\n" << c.to_text();
  return c;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

int cmd_recognize(const std::string& checkpoint, const std::vector<std::string>& paths) {
  const auto model = load_checkpoint(checkpoint);
  int status = kOk;
  for (const auto& path : paths) {
    Image img;
    try {
      img = load_image(path, model->config().channels);
    } catch (const DataError& e) {
      std::cerr << path << ": " << e.what() << "\n";
      status = kFailure;
      continue;
    }
    const Recognition r = model->recognize(img);
    std::cout << path << "\t" << r.text << "\t" << fmt(r.confidence) << "\n";
  }
  return status;
}

int cmd_train(const ConfigSource& src, const std::string& train_path, const std::string& val_path) {
  const Config c = effective_config(src);
  const ModelConfig mc = model_config_from(c);
  const TrainConfig tc = train_config_from(c);
  const LabeledSet train_set = labeled_set(load_manifest(train_path), mc.channels);
  LabeledSet val_set;
  if (!val_path.empty()) val_set = labeled_set(load_manifest(val_path), mc.channels);
  Model model(mc, tc.seed);
  const TrainResult r = train(model, tc, train_set, val_path.empty() ? nullptr : &val_set);
  std::cout << "final_loss\t" << r.final_loss << "\n";
  if (r.best_val_accuracy >= 0.0) std::cout << "best_val_accuracy\t" << fmt(r.best_val_accuracy) << "\n";
  std::cout << "log\t" << r.log_path.string() << "\n";
  std::cout << "final_checkpoint\t" << r.final_checkpoint.string() << "\n";
  std::cout << "best_checkpoint\t" << r.best_checkpoint.string() << "\n";
  return kOk;
}

int cmd_evaluate(const ConfigSource& src, const std::string& checkpoint,
                 const std::vector<std::string>& manifests, const std::string& normalization,
                 const std::string& predictions_path) {
  Config c = effective_config(src);
  if (!normalization.empty()) c.set("eval.normalization", normalization);
  const Normalization norm = parse_normalization(c.get("eval.normalization"));
  const auto model = load_checkpoint(checkpoint);
  std::vector<EvalReport> reports;
  for (const auto& m : manifests) {
    reports.push_back(evaluate(*model, labeled_set(load_manifest(m), model->config().channels), norm));
  }
  std::cout << "dataset\tsize\taccuracy\n";
  std::int64_t total = 0;
  for (const EvalReport& r : reports) {
    std::cout << r.dataset << "\t" << r.total << "\t" << fmt(r.accuracy) << "\n";
    total += r.total;
  }
  std::cout << "Average\t" << total << "\t" << fmt(weighted_average(reports)) << "\n";
  std::cerr << "# model " << reports.front().model << ", normalization " << to_string(norm) << "\n";
  if (!predictions_path.empty()) {
    std::ofstream out(predictions_path);
    out << "dataset\tsource\ttruth\tprediction\tconfidence\tcorrect\n";
    for (const EvalReport& r : reports)
      for (const Prediction& p : r.predictions)
        out << r.dataset << "\t" << p.source << "\t" << p.truth << "\t" << p.text << "\t"
            << fmt(p.confidence) << "\t" << (p.correct ? 1 : 0) << "\n";
    if (!out) throw DataError("cannot write " + predictions_path);
  }
  return kOk;
}

int cmd_generate(const ConfigSource& src, int count, const std::string& out_dir) {
  const Config c = effective_config(src);
  const auto manifest = generate_dataset(synthesis_spec_from(c), count, out_dir);
  std::cout << "manifest\t" << manifest.string() << "\n";
  return kOk;
}

int cmd_lexicon(const std::string& manifest, const std::string& plot) {
  const CharHistogram h = lexicon_frequency(load_manifest(manifest, false));
  for (const auto& [ch, n] : h.sorted()) std::cout << ch << "\t" << n << "\n";
  std::cerr << "# imbalance ratio " << h.imbalance_ratio() << " over " << h.total
            << " characters\n";
  if (!plot.empty()) save_histogram_plot(h, plot);
  return kOk;
}

int cmd_ablate(const ConfigSource& src, const std::string& kind, const std::string& train_path,
               const std::vector<std::string>& eval_paths) {
  const Config c = effective_config(src);
  const ModelConfig mc = model_config_from(c);
  const TrainConfig tc = train_config_from(c);
  const LabeledSet train_set = labeled_set(load_manifest(train_path), mc.channels);
  std::vector<LabeledSet> eval_sets;
  for (const auto& p : eval_paths) eval_sets.push_back(labeled_set(load_manifest(p), mc.channels));
  const AblationReport report = kind == "loss"
                                    ? ablate_loss(mc, tc, train_set, eval_sets)
                                    : ablate_rectification(mc, tc, train_set, eval_sets);
  std::cerr << report.to_text();
  for (const auto& path : report.write(tc.output_dir, "ablate_" + kind)) {
    std::cout << "report\t" << path.string() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene text recognition: rectify, encode, decode."};
  app.require_subcommand(1);

  ConfigSource src;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", src.file, "key = value config file")->check(CLI::ExistingFile);
    sub->allow_extras();
  };

  std::string checkpoint, train_path, val_path, out_dir, normalization, plot, kind, predictions;
  std::vector<std::string> inputs;
  int count = 0;

  auto* rec = app.add_subcommand("recognize", "Print text and confidence per image");
  rec->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  rec->add_option("images", inputs, "image files")->required();

  auto* tr = app.add_subcommand("train", "Train a model from a manifest");
  tr->add_option("--train", train_path, "training manifest")->required();
  tr->add_option("--val", val_path, "validation manifest");
  add_config(tr);

  auto* ev = app.add_subcommand("evaluate", "Word accuracy per manifest and weighted average");
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("manifests", inputs, "evaluation manifests")->required();
  ev->add_option("--normalization", normalization, "comparison policy")->check(CLI::IsMember({"alnum-nocase", "exact"}));
  ev->add_option("--predictions", predictions, "write per-sample predictions (TSV)");
  add_config(ev);

  auto* gen = app.add_subcommand("generate-data", "Render synthetic word images and a manifest");
  gen->add_option("--count", count, "number of images")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", out_dir, "output directory")->required();
  add_config(gen);

  auto* lex = app.add_subcommand("analyze-lexicon", "Character frequency table of a manifest");
  lex->add_option("manifest", train_path, "dataset manifest")->required();
  lex->add_option("--plot", plot, "write a bar chart PNG");

  auto* abl = app.add_subcommand("ablate", "Train two variants and compare them");
  abl->add_option("kind", kind, "which ablation")->required()->check(CLI::IsMember({"loss", "rectification"}));
  abl->add_option("--train", train_path, "training manifest")->required();
  abl->add_option("--eval", inputs, "evaluation manifests")->required();
  add_config(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (auto* sub : app.get_subcommands()) {
    const auto extras = sub->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      // Accept "--key value" as well as "--key=value".
      if (extras[i].find('=') == std::string::npos && i + 1 < extras.size() &&
          extras[i + 1].rfind("--", 0) != 0) {
        src.overrides.push_back(extras[i] + "=" + extras[i + 1]);
        ++i;
      } else {
        src.overrides.push_back(extras[i]);
      }
    }
  }

  try {
    if (rec->parsed()) return cmd_recognize(checkpoint, inputs);
    if (tr->parsed()) return cmd_train(src, train_path, val_path);
    if (ev->parsed()) return cmd_evaluate(src, checkpoint, inputs, normalization, predictions);
    if (gen->parsed()) return cmd_generate(src, count, out_dir);
    if (lex->parsed()) return cmd_lexicon(train_path, plot);
    if (abl->parsed()) return cmd_ablate(src, kind, train_path, inputs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
