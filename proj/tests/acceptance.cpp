// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. `acceptance N` runs criterion N (1-8), `acceptance all`
// runs every criterion. Each criterion prints one line:
//   PASS|FAIL <n> <name>: <measurements>
// and the exit status is nonzero if any criterion failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "strec/backbone.hpp"
#include "strec/checkpoint.hpp"
#include "strec/config.hpp"
#include "strec/data.hpp"
#include "strec/errors.hpp"
#include "strec/objective.hpp"
#include "strec/ops.hpp"
#include "strec/recognizer.hpp"
#include "strec/rectifier.hpp"
#include "strec/trainer.hpp"
#include "strec/vocabulary.hpp"
#include "test_util.hpp"

namespace {

using namespace strec;
using strec::testing::gradient_error;
using strec::testing::max_abs_diff;
using strec::testing::probe;
using strec::testing::random_tensor;
namespace fs = std::filesystem;

// Tolerances.
constexpr double kRowSumTol = 1e-6;
constexpr double kSingleHeadTol = 1e-6;
constexpr double kFocalNllTol = 1e-7;
constexpr double kLossGradTol = 1e-4;
constexpr double kScalarTol = 1e-6;
constexpr double kIdentityWarpTol = 1e-5;
constexpr double kInterpolationTol = 1e-4;
constexpr double kLinearityTol = 1e-6;
constexpr double kGridGradTol = 1e-3;
constexpr int kInstances = 1000;

// Experiment sizes.
constexpr int kOverfitWords = 50;
constexpr int kOverfitSteps = 2000;
constexpr int kWindow = 100;
constexpr double kOverfitAccuracy = 0.95;
constexpr double kOverfitLoss = 0.1;
constexpr double kMinImbalance = 20.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double x, const char* fmt = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::path(STREC_ACCEPTANCE_WORK) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Config toy_config() {
  Config c = Config::defaults();
  c.apply_file(fs::path(STREC_TEST_DATA) / "toy.conf");
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 1. Stage sizes of the full-width backbone on a 32x100 input.
Outcome shape_conformance() {
  Rng rng(1);
  ParameterStore store;
  const Backbone net(store, "backbone", 3, BackboneConfig{}, rng);
  const Tensor x = random_tensor({1, 3, 32, 100}, rng, 0, 1);
  std::vector<std::pair<std::int64_t, std::int64_t>> shapes;
  const Timer t;
  const Tensor seq = [&] {
    NoGradGuard no_grad;
    return net(x, false, &shapes);
  }();
  const double secs = t.seconds();
  const std::vector<std::pair<std::int64_t, std::int64_t>> want{
      {32, 100}, {16, 50}, {8, 25}, {4, 25}, {2, 25}, {1, 25}};
  std::string got;
  for (const auto& [h, w] : shapes) got += std::to_string(h) + "x" + std::to_string(w) + " ";
  const bool ok = shapes == want && seq.shape() == Shape{1, 25, 512} && secs < 1.0;
  return {ok, "stages " + got + "sequence " + shape_to_string(seq.shape()) + " in " +
                  num(secs, "%.3f") + "s"};
}

// 2. Attention invariants over random instances.
Outcome attention_invariants() {
  Rng rng(2);
  double worst_row = 0.0;
  double worst_head = 0.0;
  std::int64_t masked_nonzero = 0;
  std::int64_t causal_breaks = 0;
  AttentionConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.d_ff = 16;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 2;
  cfg.max_decode_length = 10;
  cfg.max_positions = 16;
  ParameterStore store;
  const Recognizer rec(store, "rec", cfg, rng);
  const Timer t;
  for (int trial = 0; trial < kInstances; ++trial) {
    const auto n = static_cast<std::int64_t>(1 + rng.below(8));
    const auto m = static_cast<std::int64_t>(1 + rng.below(8));
    const auto d = static_cast<std::int64_t>(1 + rng.below(8));
    const Tensor q = random_tensor({n, d}, rng, -3, 3);
    const Tensor k = random_tensor({m, d}, rng, -3, 3);
    const Tensor v = random_tensor({m, d}, rng, -3, 3);
    AttentionMask mask{n, m, std::vector<double>(static_cast<std::size_t>(n * m), 0.0)};
    for (std::int64_t i = 0; i < n; ++i) {
      const auto keep = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(m)));
      for (std::int64_t j = 0; j < m; ++j) {
        if (j != keep && rng.uniform() < 0.4) {
          mask.values[static_cast<std::size_t>(i * m + j)] = -INFINITY;
        }
      }
    }
    const auto out = scaled_dot_product_attention(q, k, v, &mask);
    const auto w = out.weights.to_vector();
    for (std::int64_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::int64_t j = 0; j < m; ++j) {
        const double x = w[static_cast<std::size_t>(i * m + j)];
        total += x;
        if (mask.hidden(i, j) && x != 0.0) ++masked_nonzero;
      }
      worst_row = std::max(worst_row, std::abs(total - 1.0));
    }

    // One head with an identity output projection against the single-head
    // formula on the projected inputs.
    const std::int64_t dm = 1 + static_cast<std::int64_t>(rng.below(6));
    const Tensor qb = random_tensor({1, n, dm}, rng), kb = random_tensor({1, m, dm}, rng);
    const Tensor vb = random_tensor({1, m, dm}, rng);
    Tensor eye = Tensor::zeros({dm, dm});
    for (std::int64_t i = 0; i < dm; ++i) eye.mutable_data()[static_cast<std::size_t>(i * dm + i)] = 1.0;
    const MultiHeadWeights mw{random_tensor({dm, dm}, rng), random_tensor({dm, dm}, rng),
                              random_tensor({dm, dm}, rng), eye};
    const Tensor mh = multi_head_attention(qb, kb, vb, mw, 1);
    const auto single = scaled_dot_product_attention(
        ops::linear(qb, mw.wq), ops::linear(kb, mw.wk), ops::linear(vb, mw.wv), nullptr);
    worst_head = std::max(worst_head, max_abs_diff(mh.to_vector(), single.output.to_vector()));

    // Causality: logits at t never see targets after t.
    const int len = 2 + static_cast<int>(rng.below(7));
    const int cut = static_cast<int>(rng.below(static_cast<std::uint64_t>(len - 1)));
    std::vector<int> a{Vocabulary::kStart}, b{Vocabulary::kStart};
    for (int i = 1; i < len; ++i) {
      a.push_back(static_cast<int>(rng.below(94)));
      b.push_back(i <= cut ? a.back() : static_cast<int>(rng.below(94)));
    }
    const Tensor memory = random_tensor({1, 1 + static_cast<std::int64_t>(rng.below(6)), 8}, rng);
    const auto la = rec.decode_train(a, 1, len, memory, ForwardContext{}).to_vector();
    const auto lb = rec.decode_train(b, 1, len, memory, ForwardContext{}).to_vector();
    for (std::size_t i = 0; i < static_cast<std::size_t>((cut + 1) * Vocabulary::kSize); ++i) {
      if (la[i] != lb[i]) {
        ++causal_breaks;
        break;
      }
    }
  }
  const bool ok = worst_row <= kRowSumTol && masked_nonzero == 0 && causal_breaks == 0 &&
                  worst_head <= kSingleHeadTol && t.seconds() < 10.0;
  return {ok, std::to_string(kInstances) + " instances, max |row sum - 1| " + num(worst_row) +
                  ", nonzero masked weights " + std::to_string(masked_nonzero) +
                  ", causal violations " + std::to_string(causal_breaks) +
                  ", max |h=1 - single| " + num(worst_head) + ", " + num(t.seconds(), "%.2f") + "s"};
}

// 3. Loss values, ordering and gradients.
Outcome loss_correctness() {
  Rng rng(3);
  const Timer t;
  double worst_equiv = 0.0;
  for (int trial = 0; trial < kInstances; ++trial) {
    const auto b = static_cast<std::int64_t>(1 + rng.below(3));
    const auto len = static_cast<std::int64_t>(1 + rng.below(6));
    const auto v = static_cast<std::int64_t>(2 + rng.below(20));
    const Tensor z = random_tensor({b, len, v}, rng, -6, 6);
    std::vector<int> y(static_cast<std::size_t>(b * len));
    for (int& c : y) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
    worst_equiv = std::max(worst_equiv, std::abs(focal_loss(z, y, 1.0, 0.0).item() - nll_loss(z, y).item()));
  }

  bool decreasing = true;
  for (const double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    double prev = focal_term(1e-4, 1.0, gamma);
    for (int i = 2; i < 10000; ++i) {
      const double cur = focal_term(i * 1e-4, 1.0, gamma);
      decreasing = decreasing && cur < prev;
      prev = cur;
    }
  }

  double worst_grad = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor z = strec::testing::leaf({2, 3, 5}, rng, -4, 4);
    std::vector<int> y(6);
    for (int& c : y) c = static_cast<int>(rng.below(5));
    const double gamma = rng.uniform(0.0, 4.0);
    const double alpha = rng.uniform(0.25, 2.0);
    worst_grad = std::max(worst_grad, gradient_error([&] { return focal_loss(z, y, alpha, gamma); }, z));
  }

  const double half = focal_term(0.5, 1.0, 2.0);
  const std::vector<int> one{3};
  const double uniform = focal_loss(Tensor::zeros({1, Vocabulary::kSize}), one, 1.0, 0.0).item();
  const double half_err = std::abs(half - 0.25 * std::log(2.0));
  const double uniform_err = std::abs(uniform - std::log(97.0));
  const bool ok = worst_equiv <= kFocalNllTol && decreasing && worst_grad < kLossGradTol &&
                  half_err <= kScalarTol && uniform_err <= kScalarTol && t.seconds() < 10.0;
  return {ok, "max |FL(g=0) - NLL| " + num(worst_equiv) + ", strictly decreasing " +
                  (decreasing ? "yes" : "no") + ", max grad rel err " + num(worst_grad) +
                  ", FL(0.5) " + num(half, "%.6f") + ", uniform " + num(uniform, "%.5f") + ", " +
                  num(t.seconds(), "%.2f") + "s"};
}

// 4. Rectifier geometry.
Outcome rectifier_geometry() {
  Rng rng(4);
  const Timer t;
  ParameterStore store;
  const Rectifier rect(store, "rectifier", 3, RectifierConfig{}, rng);
  double worst_identity = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Image> imgs;
    for (int i = 0; i < 2; ++i) {
      Image img(64, 256, 3);
      for (double& v : img.pixels) v = rng.uniform();
      imgs.push_back(img);
    }
    const Tensor x = images_to_tensor(imgs);
    const auto warped = rect(x).to_vector();
    worst_identity = std::max(worst_identity, max_abs_diff(warped, Rectifier::plain_resize(x).to_vector()));
    std::vector<Image> small;
    for (const Image& img : imgs) small.push_back(resize_bilinear(img, kRectifiedHeight, kRectifiedWidth));
    worst_identity = std::max(worst_identity, max_abs_diff(warped, images_to_tensor(small).to_vector()));
  }

  double worst_interp = 0.0;
  const ControlPoints target = canonical_layout(20);
  for (int trial = 0; trial < 200; ++trial) {
    ControlPoints source = target;
    for (Point2& p : source) {
      p.x = std::clamp(p.x + rng.uniform(-0.1, 0.1), 0.0, 1.0);
      p.y = std::clamp(p.y + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    }
    const TpsTransform tps = solve_tps(source, target, RectifierConfig{}.regularization);
    for (std::size_t i = 0; i < target.size(); ++i) {
      const Point2 q = tps.map(target[i]);
      worst_interp = std::max({worst_interp, std::abs(q.x - source[i].x), std::abs(q.y - source[i].y)});
    }
  }

  double worst_linear = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({1, 2, 9, 13}, rng), b = random_tensor({1, 2, 9, 13}, rng);
    const Tensor grid = random_tensor({1, 5, 7, 2}, rng, -0.1, 1.1);
    const double s = rng.uniform(-2, 2), r = rng.uniform(-2, 2);
    const auto lhs = ops::grid_sample(ops::add(ops::scale(a, s), ops::scale(b, r)), grid).to_vector();
    const auto rhs = ops::add(ops::scale(ops::grid_sample(a, grid), s),
                              ops::scale(ops::grid_sample(b, grid), r)).to_vector();
    worst_linear = std::max(worst_linear, max_abs_diff(lhs, rhs));
  }

  double worst_grad = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor img = random_tensor({1, 2, 9, 13}, rng);
    Tensor grid = strec::testing::leaf({1, 4, 5, 2}, rng, 0.05, 0.95);
    worst_grad = std::max(worst_grad, gradient_error([&] { return probe(ops::grid_sample(img, grid)); }, grid));
  }
  const bool ok = worst_identity <= kIdentityWarpTol && worst_interp < kInterpolationTol &&
                  worst_linear <= kLinearityTol && worst_grad < kGridGradTol && t.seconds() < 30.0;
  return {ok, "identity warp vs resize " + num(worst_identity) + ", control-point residual " +
                  num(worst_interp) + ", linearity " + num(worst_linear) + ", grid grad rel err " +
                  num(worst_grad) + ", " + num(t.seconds(), "%.1f") + "s"};
}

// Means over consecutive full windows.
std::vector<double> window_means(const std::vector<LogRecord>& log, int window) {
  std::vector<double> out;
  for (std::size_t start = 0; start + static_cast<std::size_t>(window) <= log.size(); start += window) {
    double total = 0.0;
    for (std::size_t i = start; i < start + static_cast<std::size_t>(window); ++i) total += log[i].loss;
    out.push_back(total / window);
  }
  return out;
}

// 5. Toy overfit.
Outcome toy_overfit() {
  const Timer t;
  Config c = toy_config();
  c.set("train.max_steps", std::to_string(kOverfitSteps));
  const fs::path dir = work_dir("overfit");
  c.set("train.output_dir", (dir / "run").string());
  const fs::path manifest = generate_dataset(synthesis_spec_from(c), kOverfitWords, dir / "data");
  const LabeledSet set = labeled_set(load_manifest(manifest), 3);
  const TrainConfig tc = train_config_from(c);
  Model model(model_config_from(c), tc.seed);
  const TrainResult r = train(model, tc, set, &set);
  const EvalReport report = evaluate(model, set, Normalization::kExact);
  const auto means = window_means(r.log, kWindow);
  std::size_t worst_window = 0;
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] - means[i - 1] > worst_rise) {
      worst_rise = means[i] - means[i - 1];
      worst_window = i;
    }
  }
  const double final_loss = means.back();
  const bool monotone = worst_rise <= 0.0;
  const bool ok = report.accuracy >= kOverfitAccuracy && final_loss < kOverfitLoss && monotone;
  std::string detail = "word accuracy " + num(report.accuracy, "%.3f") + ", final window loss " +
                       num(final_loss, "%.4g") + ", last step loss " + num(r.final_loss, "%.4g") +
                       ", windows monotone " + (monotone ? "yes" : "no");
  if (!monotone) {
    detail += " (largest rise " + num(worst_rise, "%.3g") + " at steps " +
              std::to_string(worst_window * kWindow + 1) + "-" +
              std::to_string((worst_window + 1) * kWindow) + ")";
  }
  return {ok, detail + ", " + num(t.seconds(), "%.0f") + "s, log " + r.log_path.string()};
}

// 6. Loss ablation on an imbalanced lexicon.
Outcome loss_ablation() {
  const Timer t;
  Config c = toy_config();
  c.set("train.max_steps", "600");
  c.set("train.eval_every", "0");
  const fs::path dir = work_dir("ablate_loss");
  c.set("train.output_dir", dir.string());
  SynthesisSpec spec = synthesis_spec_from(c);
  const fs::path train_manifest = generate_dataset(spec, 120, dir / "train");
  spec.seed += 1000;
  const fs::path heldout_manifest = generate_dataset(spec, 40, dir / "heldout");
  const LabeledSet train_set = labeled_set(load_manifest(train_manifest), 3);
  LabeledSet train_eval = train_set;
  train_eval.name = "train";
  LabeledSet heldout = labeled_set(load_manifest(heldout_manifest), 3);
  heldout.name = "heldout";
  const double ratio = lexicon_frequency(load_manifest(train_manifest)).imbalance_ratio();
  const std::vector<LabeledSet> evals{train_eval, heldout};
  const AblationReport r = ablate_loss(model_config_from(c), train_config_from(c), train_set, evals);
  const auto files = r.write(dir, "ablate_loss");
  const auto j = slurp(files[1]);
  const bool columns = r.first_label == "NLL" && r.second_label == "Focal" &&
                       r.rows.size() == evals.size() && !r.rare_chars.empty();
  const bool ok = ratio >= kMinImbalance && columns && j.find("rare_decile") != std::string::npos;
  return {ok, "imbalance ratio " + num(ratio, "%.1f") + ", rare decile '" +
                  std::string(r.rare_chars.begin(), r.rare_chars.end()) + "' recall NLL " +
                  num(r.rare_recall_first, "%.3f") + " / Focal " + num(r.rare_recall_second, "%.3f") +
                  ", average accuracy NLL " + num(r.average.first, "%.3f") + " / Focal " +
                  num(r.average.second, "%.3f") + ", " + num(t.seconds(), "%.0f") + "s, report " +
                  files[0].string()};
}

// 7. Rectification ablation on curved text.
Outcome rectification_ablation() {
  const Timer t;
  Config c = toy_config();
  c.set("train.max_steps", "600");
  c.set("train.eval_every", "0");
  c.set("data.curvature", "0.3");
  const fs::path dir = work_dir("ablate_rect");
  c.set("train.output_dir", dir.string());
  SynthesisSpec spec = synthesis_spec_from(c);
  const fs::path train_manifest = generate_dataset(spec, 100, dir / "train");
  spec.seed += 1000;
  const fs::path curved_manifest = generate_dataset(spec, 40, dir / "curved");
  const LabeledSet train_set = labeled_set(load_manifest(train_manifest), 3);
  LabeledSet curved = labeled_set(load_manifest(curved_manifest), 3);
  curved.name = "curved";

  // Pass-through contract, checked directly on the curved images.
  ModelConfig off = model_config_from(c);
  off.rectifier.enabled = false;
  const Model plain(off, 1);
  bool bit_exact = true;
  for (std::size_t i = 0; i < curved.samples.size(); i += 8) {
    std::vector<Image> batch;
    for (std::size_t k = i; k < std::min(curved.samples.size(), i + 8); ++k) batch.push_back(curved.samples[k].image);
    NoGradGuard no_grad;
    const Tensor x = plain.prepare(batch);
    const auto a = plain.rectify(x).to_vector();
    const auto b = Rectifier::plain_resize(x).to_vector();
    bit_exact = bit_exact && a.size() == b.size() &&
                std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  }

  // Training itself re-checks the pass-through on every batch.
  const std::vector<LabeledSet> evals{curved};
  const AblationReport r = ablate_rectification(model_config_from(c), train_config_from(c), train_set, evals);
  const auto files = r.write(dir, "ablate_rectification");
  const bool layout = r.rows.size() == 1 && r.rows[0].dataset == "curved";
  const double gap = r.rows[0].second - r.rows[0].first;
  return {bit_exact && layout,
          "pass-through bit-exact " + std::string(bit_exact ? "yes" : "no") + ", curved accuracy without " +
              num(r.rows[0].first, "%.3f") + " / with " + num(r.rows[0].second, "%.3f") + " (gap " +
              (gap > 0 ? "+" : gap < 0 ? "-" : "0") + "), " + num(t.seconds(), "%.0f") + "s, report " +
              files[0].string()};
}

// 8. Determinism and round trips.
Outcome determinism() {
  const Timer t;
  Config c = toy_config();
  c.set("train.max_steps", "15");
  c.set("train.eval_every", "5");
  c.set("train.batch_size", "4");
  const fs::path dir = work_dir("determinism");
  const SynthesisSpec spec = synthesis_spec_from(c);
  const fs::path m1 = generate_dataset(spec, 12, dir / "gen1");
  const fs::path m2 = generate_dataset(spec, 12, dir / "gen2");
  bool synthesis_same = slurp(m1) == slurp(m2);
  const Manifest manifest = load_manifest(m1);
  for (const ManifestRecord& rec : manifest.records) {
    synthesis_same = synthesis_same && slurp(rec.path) == slurp(m2.parent_path() / rec.relative);
  }
  write_manifest(dir / "gen1" / "rewritten.tsv", manifest.records);
  const bool manifest_same = slurp(m1) == slurp(dir / "gen1" / "rewritten.tsv");

  const LabeledSet set = labeled_set(manifest, 3);
  std::vector<std::string> logs;
  for (const char* run : {"run_a", "run_b"}) {
    c.set("train.output_dir", (dir / run).string());
    const TrainConfig tc = train_config_from(c);
    Model model(model_config_from(c), tc.seed);
    train(model, tc, set, &set);
    logs.push_back(slurp(dir / run / "train_log.tsv"));
  }
  const bool logs_same = logs[0] == logs[1];

  const auto loaded = load_checkpoint(dir / "run_a" / "final.ckpt");
  save_checkpoint(dir / "resaved.ckpt", *loaded, 1, 15);
  const auto reloaded = load_checkpoint(dir / "resaved.ckpt");
  const EvalReport a = evaluate(*loaded, set, Normalization::kExact);
  const EvalReport b = evaluate(*reloaded, set, Normalization::kExact);
  bool eval_same = a.accuracy == b.accuracy && a.model == b.model;
  for (std::size_t i = 0; i < a.predictions.size(); ++i) {
    eval_same = eval_same && a.predictions[i].text == b.predictions[i].text &&
                a.predictions[i].confidence == b.predictions[i].confidence;
  }
  const bool ok = synthesis_same && manifest_same && logs_same && eval_same && t.seconds() < 300.0;
  auto yn = [](bool v) { return v ? "yes" : "no"; };
  return {ok, std::string("identical training logs ") + yn(logs_same) + ", checkpoint evaluation identical " +
                  yn(eval_same) + ", manifest round trip identical " + yn(manifest_same) +
                  ", synthesis identical " + yn(synthesis_same) + ", " + num(t.seconds(), "%.1f") + "s"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "shape-conformance", shape_conformance},
      {2, "attention-invariants", attention_invariants},
      {3, "loss-correctness", loss_correctness},
      {4, "rectifier-geometry", rectifier_geometry},
      {5, "toy-overfit", toy_overfit},
      {6, "loss-ablation", loss_ablation},
      {7, "rectification-ablation", rectification_ablation},
      {8, "determinism-round-trips", determinism},
  };
  const std::string which = argc > 1 ? argv[1] : "all";
  bool all_pass = true;
  bool ran = false;
  for (const Criterion& c : criteria) {
    if (which != "all" && which != std::to_string(c.id)) continue;
    ran = true;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << ": " << o.detail << std::endl;
    all_pass = all_pass && o.pass;
  }
  if (!ran) {
    std::cerr << "usage: acceptance [1-8|all]\n";
    return 2;
  }
  return all_pass ? 0 : 1;
}
