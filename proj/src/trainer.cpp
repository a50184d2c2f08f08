// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strec/checkpoint.hpp"
#include "strec/config.hpp"
#include "strec/errors.hpp"
#include "strec/random.hpp"
#include "strec/vocabulary.hpp"

namespace strec {

namespace fs = std::filesystem;

namespace {

std::string format_double(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string fixed(double x, int decimals = 4) {
  if (std::isnan(x)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::vector<Tensor> parameter_tensors(Model& model) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : model.store().parameters()) out.push_back(t);
  return out;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  const auto x = a.data();
  const auto y = b.data();
  return std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

}  // namespace

std::string to_string(Normalization n) {
  return n == Normalization::kExact ? "exact" : "alnum-nocase";
}

Normalization parse_normalization(const std::string& name) {
  if (name == "alnum-nocase") return Normalization::kAlnumNoCase;
  if (name == "exact") return Normalization::kExact;
  throw ConfigError("eval.normalization: expected alnum-nocase or exact, got '" + name + "'");
}

std::string normalize(const std::string& text, Normalization n) {
  if (n == Normalization::kExact) return text;
  std::string out;
  for (const char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (max_steps < 1) throw ConfigError("train.max_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be >= 0");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
  loss.validate();
}

TrainConfig train_config_from(const Config& c) {
  TrainConfig t;
  t.lr = c.get_double("train.lr");
  t.batch_size = c.get_int("train.batch_size");
  t.max_steps = c.get_int("train.max_steps");
  t.loss = loss_config_from(c);
  t.seed = c.get_u64("train.seed");
  t.clip_norm = c.get_double("train.clip_norm");
  t.eval_every = c.get_int("train.eval_every");
  t.output_dir = c.get("train.output_dir");
  t.normalization = parse_normalization(c.get("eval.normalization"));
  t.validate();
  return t;
}

Adam::Adam(std::vector<Tensor> parameters, double lr, double beta1, double beta2, double eps)
    : params_(std::move(parameters)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    const auto n = static_cast<std::int64_t>(w.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(i);
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double clip_grad_norm(std::span<Tensor> parameters, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : parameters) {
    if (!p.has_grad()) continue;
    for (const double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (Tensor& p : parameters) {
      if (!p.has_grad()) continue;
      for (double& g : p.grad_buffer()) g *= s;
    }
  }
  return norm;
}

std::string format_log(const std::vector<LogRecord>& log) {
  std::string out = "step\tloss\tlr\tval_accuracy\n";
  for (const LogRecord& r : log) {
    out += std::to_string(r.step) + "\t" + format_double(r.loss, 17) + "\t" +
           format_double(r.lr, 6) + "\t" +
           (r.val_accuracy ? format_double(*r.val_accuracy, 6) : std::string("-")) + "\n";
  }
  return out;
}

LabeledSet labeled_set(const Manifest& manifest, int channels) {
  LabeledSet set;
  set.name = manifest.name();
  set.samples = load_samples(manifest, channels);
  for (const ManifestRecord& r : manifest.records) set.sources.push_back(r.relative);
  return set;
}

std::string model_fingerprint(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : model.store().all()) {
    for (const char c : name) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    for (const double x : t.data()) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      for (int b = 0; b < 8; ++b, bits >>= 8) h = (h ^ (bits & 0xff)) * 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EvalReport evaluate(const Model& model, const LabeledSet& set, Normalization normalization,
                    int batch_size) {
  if (set.samples.empty()) throw DataError("empty dataset");
  EvalReport report;
  report.dataset = set.name;
  report.model = model_fingerprint(model);
  report.normalization = normalization;
  const std::size_t n = set.samples.size();
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t begin = 0; begin < n; begin += step) {
    const std::size_t end = std::min(n, begin + step);
    std::vector<Image> images;
    for (std::size_t i = begin; i < end; ++i) images.push_back(set.samples[i].image);
    const auto results = model.recognize(images);
    for (std::size_t i = begin; i < end; ++i) {
      const Recognition& r = results[i - begin];
      Prediction p;
      p.source = i < set.sources.size() ? set.sources[i] : std::to_string(i);
      p.truth = set.samples[i].transcript;
      p.text = r.text;
      p.confidence = r.confidence;
      p.correct = normalize(p.text, normalization) == normalize(p.truth, normalization);
      report.correct += p.correct ? 1 : 0;
      report.predictions.push_back(std::move(p));
    }
  }
  report.total = static_cast<std::int64_t>(n);
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
  return report;
}

EvalReport evaluate(const fs::path& checkpoint, const Manifest& manifest,
                    Normalization normalization) {
  const auto model = load_checkpoint(checkpoint);
  return evaluate(*model, labeled_set(manifest, model->config().channels), normalization);
}

double weighted_average(std::span<const EvalReport> reports) {
  std::int64_t correct = 0;
  std::int64_t total = 0;
  for (const EvalReport& r : reports) {
    correct += r.correct;
    total += r.total;
  }
  if (total == 0) throw DataError("empty dataset");
  return static_cast<double>(correct) / static_cast<double>(total);
}

void CharRecall::add(const std::string& truth, const std::string& predicted) {
  const std::size_t n = truth.size();
  const std::size_t m = predicted.size();
  std::vector<int> table((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> int& { return table[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = truth[i] == predicted[j] ? at(i + 1, j + 1) + 1
                                          : std::max(at(i + 1, j), at(i, j + 1));
    }
  }
  std::vector<bool> matched(n, false);
  for (std::size_t i = 0, j = 0; i < n && j < m;) {
    if (truth[i] == predicted[j]) {
      matched[i] = true;
      ++i;
      ++j;
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    ++occurrences[truth[i]];
    if (matched[i]) ++hits[truth[i]];
  }
}

double CharRecall::pooled(std::span<const char> chars) const {
  std::int64_t h = 0;
  std::int64_t o = 0;
  for (const char c : chars) {
    if (auto it = occurrences.find(c); it != occurrences.end()) o += it->second;
    if (auto it = hits.find(c); it != hits.end()) h += it->second;
  }
  if (o == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(h) / static_cast<double>(o);
}

CharRecall char_recall(std::span<const EvalReport> reports) {
  CharRecall recall;
  for (const EvalReport& r : reports)
    for (const Prediction& p : r.predictions) recall.add(p.truth, p.text);
  return recall;
}

std::vector<char> rarest_decile(const CharHistogram& histogram) {
  const auto sorted = histogram.sorted();
  const std::size_t k = (sorted.size() + 9) / 10;
  std::vector<char> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(sorted[sorted.size() - 1 - i].first);
  return out;
}

TrainResult train(Model& model, const TrainConfig& cfg, const LabeledSet& train_set,
                  const LabeledSet* val_set) {
  cfg.validate();
  if (train_set.samples.empty()) throw DataError("empty dataset");
  const Vocabulary& vocab = Vocabulary::instance();
  std::vector<std::vector<int>> encoded;
  for (const Sample& s : train_set.samples) encoded.push_back(vocab.encode(s.transcript));

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw DataError("cannot create " + cfg.output_dir.string() + ": " + ec.message());

  TrainResult result;
  result.log_path = cfg.output_dir / "train_log.tsv";
  result.final_checkpoint = cfg.output_dir / "final.ckpt";
  result.best_checkpoint = cfg.output_dir / "best.ckpt";
  std::ofstream log_file(result.log_path, std::ios::trunc);
  if (!log_file) throw DataError("cannot write " + result.log_path.string());
  log_file << "step\tloss\tlr\tval_accuracy\n";

  Rng order_rng(mix_seed(cfg.seed, 1));
  Rng dropout_rng(mix_seed(cfg.seed, 2));
  const std::size_t n = train_set.samples.size();
  const std::size_t batch = std::min(n, static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::size_t> order(n);
  std::size_t cursor = n;

  std::vector<Tensor> params = parameter_tensors(model);
  Adam adam(params, cfg.lr);
  const ForwardContext ctx{true, &dropout_rng};

  for (int step = 1; step <= cfg.max_steps; ++step) {
    std::vector<std::size_t> picked;
    while (picked.size() < batch) {
      if (cursor == n) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        cursor = 0;
      }
      picked.push_back(order[cursor++]);
    }
    std::vector<Image> images;
    std::vector<std::vector<int>> targets;
    for (const std::size_t i : picked) {
      images.push_back(train_set.samples[i].image);
      targets.push_back(encoded[i]);
    }
    const Tensor x = model.prepare(images);
    if (!model.rectifier().enabled()) {
      NoGradGuard no_grad;
      if (!bit_equal(model.rectify(x), Rectifier::plain_resize(x))) {
        throw NumericalError("disabled rectifier diverged from the plain resize at step " +
                             std::to_string(step));
      }
      ++result.passthrough_checks;
    }
    const TeacherBatch tb = make_teacher_batch(targets);
    model.store().zero_grad();
    const Tensor logits = model.forward(x, tb, ctx);
    Tensor loss = sequence_loss(logits, tb.labels, cfg.loss);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericalError("training diverged: loss is " + format_double(value, 6) + " at step " +
                           std::to_string(step));
    }
    loss.backward();
    clip_grad_norm(params, cfg.clip_norm);
    adam.step();

    LogRecord rec{step, value, cfg.lr, std::nullopt};
    const bool eval_now =
        val_set && ((cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.max_steps);
    if (eval_now) {
      rec.val_accuracy = evaluate(model, *val_set, cfg.normalization).accuracy;
      if (*rec.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = *rec.val_accuracy;
        save_checkpoint(result.best_checkpoint, model, cfg.seed, static_cast<std::uint64_t>(step));
      }
    }
    result.log.push_back(rec);
    log_file << format_log({rec}).substr(std::strlen("step\tloss\tlr\tval_accuracy\n"));
    log_file.flush();
    if (!log_file) throw DataError("write failed: " + result.log_path.string());
    result.final_loss = value;
  }
  save_checkpoint(result.final_checkpoint, model, cfg.seed,
                  static_cast<std::uint64_t>(cfg.max_steps));
  if (!val_set) {
    fs::copy_file(result.final_checkpoint, result.best_checkpoint,
                  fs::copy_options::overwrite_existing, ec);
    if (ec) throw DataError("cannot write " + result.best_checkpoint.string());
  }
  return result;
}

std::string AblationReport::to_text() const {
  std::ostringstream os;
  os << title << "\n";
  os << "dataset\tsize\t" << first_label << "\t" << second_label << "\n";
  for (const AblationRow& r : rows) {
    os << r.dataset << "\t" << r.size << "\t" << fixed(r.first) << "\t" << fixed(r.second) << "\n";
  }
  os << average.dataset << "\t" << average.size << "\t" << fixed(average.first) << "\t"
     << fixed(average.second) << "\n";
  os << "\nrare-decile characters\t" << std::string(rare_chars.begin(), rare_chars.end()) << "\n";
  os << "rare-decile recall\t-\t" << fixed(rare_recall_first) << "\t" << fixed(rare_recall_second)
     << "\n";
  os << "training imbalance ratio\t" << fixed(imbalance_ratio, 2) << "\n";
  return os.str();
}

std::string AblationReport::to_json() const {
  using nlohmann::json;
  auto row = [&](const AblationRow& r) {
    return json{{"dataset", r.dataset}, {"size", r.size}, {first_label, r.first},
                {second_label, r.second}};
  };
  json j;
  j["title"] = title;
  j["columns"] = {first_label, second_label};
  j["rows"] = json::array();
  for (const AblationRow& r : rows) j["rows"].push_back(row(r));
  j["average"] = row(average);
  j["rare_decile"] = {{"characters", std::string(rare_chars.begin(), rare_chars.end())},
                      {first_label, rare_recall_first},
                      {second_label, rare_recall_second}};
  j["imbalance_ratio"] = imbalance_ratio;
  return j.dump(2) + "\n";
}

std::vector<fs::path> AblationReport::write(const fs::path& dir, const std::string& stem) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path txt = dir / (stem + ".txt");
  const fs::path js = dir / (stem + ".json");
  for (const auto& [path, body] : {std::pair{txt, to_text()}, std::pair{js, to_json()}}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw DataError("cannot write " + path.string());
  }
  return {txt, js};
}

namespace {

struct Variant {
  std::string label;
  ModelConfig model;
  TrainConfig train;
};

AblationReport run_ablation(const std::string& title, const Variant& a, const Variant& b,
                            const LabeledSet& train_set, std::span<const LabeledSet> eval_sets) {
  if (eval_sets.empty()) throw DataError("ablation needs at least one evaluation set");
  std::vector<std::string> transcripts;
  for (const Sample& s : train_set.samples) transcripts.push_back(s.transcript);
  const CharHistogram histogram = lexicon_frequency(transcripts);

  AblationReport report;
  report.title = title;
  report.first_label = a.label;
  report.second_label = b.label;
  report.rare_chars = rarest_decile(histogram);
  report.imbalance_ratio = histogram.imbalance_ratio();
  for (const LabeledSet& s : eval_sets) {
    report.rows.push_back({s.name, static_cast<std::int64_t>(s.samples.size()), 0.0, 0.0});
  }
  report.average.dataset = "Average";

  for (int which = 0; which < 2; ++which) {
    const Variant& v = which == 0 ? a : b;
    Model model(v.model, v.train.seed);
    train(model, v.train, train_set);
    std::vector<EvalReport> reports;
    for (const LabeledSet& s : eval_sets) reports.push_back(evaluate(model, s, v.train.normalization));
    const double rare = char_recall(reports).pooled(report.rare_chars);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      (which == 0 ? report.rows[i].first : report.rows[i].second) = reports[i].accuracy;
    }
    (which == 0 ? report.average.first : report.average.second) = weighted_average(reports);
    (which == 0 ? report.rare_recall_first : report.rare_recall_second) = rare;
  }
  for (const AblationRow& r : report.rows) report.average.size += r.size;
  return report;
}

}  // namespace

AblationReport ablate_loss(const ModelConfig& model, const TrainConfig& cfg,
                           const LabeledSet& train_set, std::span<const LabeledSet> eval_sets) {
  Variant nll{"NLL", model, cfg};
  nll.train.loss.family = LossFamily::kNll;
  nll.train.output_dir = cfg.output_dir / "nll";
  Variant focal{"Focal", model, cfg};
  focal.train.loss.family = LossFamily::kFocal;
  focal.train.output_dir = cfg.output_dir / "focal";
  return run_ablation("Loss ablation", nll, focal, train_set, eval_sets);
}

AblationReport ablate_rectification(const ModelConfig& model, const TrainConfig& cfg,
                                    const LabeledSet& train_set,
                                    std::span<const LabeledSet> eval_sets) {
  Variant off{"Without rectification", model, cfg};
  off.model.rectifier.enabled = false;
  off.train.output_dir = cfg.output_dir / "rectification_off";
  Variant on{"With rectification", model, cfg};
  on.model.rectifier.enabled = true;
  on.train.output_dir = cfg.output_dir / "rectification_on";
  return run_ablation("Rectification ablation", off, on, train_set, eval_sets);
}

}  // namespace strec
