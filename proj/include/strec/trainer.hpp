// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Training loop, word-accuracy evaluation and the two ablation harnesses.
//
// Training log schema (train_log.tsv): a header line
//   step<TAB>loss<TAB>lr<TAB>val_accuracy
// then one line per optimizer step. val_accuracy is "-" on steps without a
// validation pass. Losses are printed with 17 significant digits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strec/data.hpp"
#include "strec/model.hpp"
#include "strec/objective.hpp"

namespace strec {

class Config;

enum class Normalization { kAlnumNoCase, kExact };

std::string to_string(Normalization n);
// "alnum-nocase" or "exact"; throws ConfigError otherwise.
Normalization parse_normalization(const std::string& name);
// alnum-nocase keeps [0-9a-zA-Z] and lowercases; exact is the identity.
std::string normalize(const std::string& text, Normalization n);

struct TrainConfig {
  double lr = 2e-5;
  int batch_size = 32;
  int max_steps = 1000;
  LossConfig loss;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;  // 0 disables clipping
  int eval_every = 100;    // 0 disables periodic validation
  std::filesystem::path output_dir = "runs/default";
  Normalization normalization = Normalization::kAlnumNoCase;

  void validate() const;
};

TrainConfig train_config_from(const Config& config);

// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<Tensor> parameters, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Applies one update from the accumulated gradients.
  void step();
  std::int64_t steps() const { return t_; }
  double lr() const { return lr_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Global L2 norm of the gradients, before scaling them down to max_norm
// when it is exceeded. max_norm <= 0 only measures.
double clip_grad_norm(std::span<Tensor> parameters, double max_norm);

struct LogRecord {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_accuracy;
};

std::string format_log(const std::vector<LogRecord>& log);

struct Prediction {
  std::string source;
  std::string truth;
  std::string text;
  double confidence = 0.0;
  bool correct = false;
};

struct EvalReport {
  double accuracy = 0.0;
  std::int64_t correct = 0;
  std::int64_t total = 0;
  std::vector<Prediction> predictions;
  std::string dataset;
  std::string model;
  Normalization normalization = Normalization::kAlnumNoCase;
};

struct LabeledSet {
  std::string name;
  std::vector<Sample> samples;
  std::vector<std::string> sources;  // per-sample ids, may be empty
};

LabeledSet labeled_set(const Manifest& manifest, int channels);

// Hex digest of all parameter and buffer values.
std::string model_fingerprint(const Model& model);

EvalReport evaluate(const Model& model, const LabeledSet& set, Normalization normalization,
                    int batch_size = 32);
EvalReport evaluate(const std::filesystem::path& checkpoint, const Manifest& manifest,
                    Normalization normalization);

// Size-weighted mean of report accuracies.
double weighted_average(std::span<const EvalReport> reports);

// Per-character hit and occurrence counts, matching each prediction to its
// label through a longest common subsequence.
struct CharRecall {
  std::map<char, std::int64_t> hits;
  std::map<char, std::int64_t> occurrences;

  void add(const std::string& truth, const std::string& predicted);
  // Pooled recall over `chars` that occur at least once; NaN if none do.
  double pooled(std::span<const char> chars) const;
};

CharRecall char_recall(std::span<const EvalReport> reports);

// The ceil(10%) least frequent characters of a histogram, rarest first.
std::vector<char> rarest_decile(const CharHistogram& histogram);

struct TrainResult {
  std::vector<LogRecord> log;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  std::filesystem::path log_path;
  double best_val_accuracy = -1.0;
  double final_loss = 0.0;
  std::int64_t passthrough_checks = 0;
};

// Teacher-forced training of `model` in place. Writes train_log.tsv,
// final.ckpt and best.ckpt (best by validation accuracy, or the final weights
// without a validation set) to cfg.output_dir. Throws NumericalError when the
// loss stops being finite.
TrainResult train(Model& model, const TrainConfig& cfg, const LabeledSet& train_set,
                  const LabeledSet* val_set = nullptr);

struct AblationRow {
  std::string dataset;
  std::int64_t size = 0;
  double first = 0.0;
  double second = 0.0;
};

struct AblationReport {
  std::string title;
  std::string first_label;
  std::string second_label;
  std::vector<AblationRow> rows;
  AblationRow average;
  std::vector<char> rare_chars;
  double rare_recall_first = 0.0;
  double rare_recall_second = 0.0;
  double imbalance_ratio = 0.0;

  std::string to_text() const;
  std::string to_json() const;
  // Writes <stem>.txt and <stem>.json under dir; returns both paths.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir,
                                           const std::string& stem) const;
};

// Trains an NLL model and a focal model from the same seed and evaluates
// both on every set.
AblationReport ablate_loss(const ModelConfig& model, const TrainConfig& cfg,
                           const LabeledSet& train_set, std::span<const LabeledSet> eval_sets);

// Trains with rectification off and on from the same seed.
AblationReport ablate_rectification(const ModelConfig& model, const TrainConfig& cfg,
                                    const LabeledSet& train_set,
                                    std::span<const LabeledSet> eval_sets);

}  // namespace strec
