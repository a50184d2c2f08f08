// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strec/checkpoint.hpp"
#include "strec/errors.hpp"
#include "strec/trainer.hpp"
#include "strec/vocabulary.hpp"
#include "test_util.hpp"

using namespace strec;
using strec::testing::scratch_dir;
using strec::testing::tiny_model;

namespace fs = std::filesystem;

namespace {

LabeledSet rendered_set(const std::string& name, const std::vector<std::string>& words) {
  SynthesisSpec spec;
  spec.fonts = {"simplex"};
  spec.color = false;
  LabeledSet set;
  set.name = name;
  for (std::size_t i = 0; i < words.size(); ++i) {
    set.samples.push_back({render_word(words[i], spec, i + 1), words[i]});
  }
  return set;
}

TrainConfig quick_config(const fs::path& dir, int steps) {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 3;
  cfg.max_steps = steps;
  cfg.eval_every = 2;
  cfg.output_dir = dir;
  return cfg;
}

// Always emits `a` until the length limit: "aaaaaaaa".
void rig_constant_output(Model& model) {
  for (double& w : model.store().find("recognizer.output.weight").mutable_data()) w = 0.0;
  model.store().find("recognizer.output.bias").mutable_data()[10] = 50.0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("normalization policies") {
  CHECK(normalize("Hello, World!", Normalization::kAlnumNoCase) == "helloworld");
  CHECK(normalize("Hello, World!", Normalization::kExact) == "Hello, World!");
  CHECK(parse_normalization("exact") == Normalization::kExact);
  CHECK_THROWS_AS(parse_normalization("loose"), ConfigError);
}

TEST_CASE("accuracy is the exact-match fraction after normalization") {
  Model model(tiny_model(3), 1);
  rig_constant_output(model);
  LabeledSet all = rendered_set("same", {"aaaaaaaa", "AAAAAAAA", "aaaa-aaaa", "aaaaaaaa"});
  const EvalReport loose = evaluate(model, all, Normalization::kAlnumNoCase);
  CHECK(loose.accuracy == 1.0);
  CHECK(loose.total == 4);
  const EvalReport strict = evaluate(model, all, Normalization::kExact);
  CHECK(strict.accuracy == 0.5);
  LabeledSet three = rendered_set("three", {"aaaaaaaa", "aaaaaaaa", "b", "aaaaaaaa"});
  const EvalReport r = evaluate(model, three, Normalization::kExact);
  CHECK(r.accuracy == 0.75);
  CHECK(r.predictions[2].text == "aaaaaaaa");
  CHECK_FALSE(r.predictions[2].correct);
  CHECK(r.dataset == "three");
  CHECK(r.model == model_fingerprint(model));
}

TEST_CASE("weighted average over datasets") {
  EvalReport a, b;
  a.total = 10;
  a.correct = 5;
  b.total = 30;
  b.correct = 30;
  const std::vector<EvalReport> both{a, b};
  CHECK(weighted_average(both) == 0.875);
  CHECK_THROWS_AS(weighted_average(std::vector<EvalReport>{}), DataError);
}

TEST_CASE("character recall follows the longest common subsequence") {
  CharRecall r;
  r.add("hello", "helo");
  CHECK(r.occurrences.at('l') == 2);
  CHECK(r.hits.at('l') == 1);
  CHECK(r.hits.at('o') == 1);
  r.add("xyz", "");
  CHECK(r.hits.count('x') == 0);
  const std::vector<char> lx{'l', 'x'};
  CHECK(r.pooled(lx) == doctest::Approx(1.0 / 3.0));
  const std::vector<char> none{'q'};
  CHECK(std::isnan(r.pooled(none)));
}

TEST_CASE("rarest decile picks the least frequent tenth") {
  CharHistogram h;
  const std::string chars = "abcdefghijk";
  for (std::size_t i = 0; i < chars.size(); ++i) h.counts[chars[i]] = static_cast<std::int64_t>(100 - i);
  const auto rare = rarest_decile(h);
  CHECK(rare == std::vector<char>{'k', 'j'});
}

TEST_CASE("one step of training records exactly one step") {
  const fs::path dir = scratch_dir("train_one");
  Model model(tiny_model(3), 2);
  const LabeledSet set = rendered_set("words", {"cat", "dog", "sun"});
  const TrainResult r = train(model, quick_config(dir, 1), set, &set);
  REQUIRE(r.log.size() == 1);
  CHECK(r.log[0].step == 1);
  CHECK(r.log[0].val_accuracy.has_value());
  CHECK(fs::exists(r.final_checkpoint));
  CHECK(fs::exists(r.best_checkpoint));
  const std::string log = slurp(r.log_path);
  CHECK(log.starts_with("step\tloss\tlr\tval_accuracy\n1\t"));
}

TEST_CASE("training is reproducible from the seed") {
  const LabeledSet set = rendered_set("words", {"cat", "dog", "sun", "tree"});
  Model a(tiny_model(3), 3);
  Model b(tiny_model(3), 3);
  const TrainResult ra = train(a, quick_config(scratch_dir("seed_a"), 4), set);
  const TrainResult rb = train(b, quick_config(scratch_dir("seed_b"), 4), set);
  CHECK(format_log(ra.log) == format_log(rb.log));
  CHECK(slurp(ra.final_checkpoint) == slurp(rb.final_checkpoint));
  Model c(tiny_model(3), 3);
  TrainConfig other = quick_config(scratch_dir("seed_c"), 4);
  other.seed = 9;
  CHECK(format_log(train(c, other, set).log) != format_log(ra.log));
}

TEST_CASE("evaluation is pure and survives a checkpoint round trip") {
  const fs::path dir = scratch_dir("eval_pure");
  Model model(tiny_model(3), 4);
  const LabeledSet set = rendered_set("words", {"ab", "cd", "ef"});
  train(model, quick_config(dir, 2), set);
  const EvalReport first = evaluate(model, set, Normalization::kExact);
  const EvalReport second = evaluate(model, set, Normalization::kExact);
  const auto loaded = load_checkpoint(dir / "final.ckpt");
  const EvalReport third = evaluate(*loaded, set, Normalization::kExact);
  for (const EvalReport* r : {&second, &third}) {
    REQUIRE(r->predictions.size() == first.predictions.size());
    CHECK(r->accuracy == first.accuracy);
    CHECK(r->model == first.model);
    for (std::size_t i = 0; i < first.predictions.size(); ++i) {
      CHECK(r->predictions[i].text == first.predictions[i].text);
      CHECK(r->predictions[i].confidence == first.predictions[i].confidence);
    }
  }
}

TEST_CASE("a non-finite loss aborts training") {
  Model model(tiny_model(3), 5);
  model.store().find("recognizer.output.bias").mutable_data()[0] =
      std::numeric_limits<double>::quiet_NaN();
  const LabeledSet set = rendered_set("words", {"ab"});
  CHECK_THROWS_AS(train(model, quick_config(scratch_dir("nan"), 3), set), NumericalError);
}

TEST_CASE("invalid training configurations are rejected") {
  TrainConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.max_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  Model model(tiny_model(3), 1);
  CHECK_THROWS_WITH_AS(train(model, TrainConfig{}, LabeledSet{}), "empty dataset", DataError);
}

TEST_CASE("clipping rescales to the requested global norm") {
  Tensor p = Tensor::zeros({2});
  p.set_requires_grad(true);
  p.grad_buffer()[0] = 3.0;
  p.grad_buffer()[1] = 4.0;
  std::vector<Tensor> ps{p};
  CHECK(clip_grad_norm(ps, 0.0) == 5.0);
  CHECK(p.grad()[0] == 3.0);
  clip_grad_norm(ps, 1.0);
  CHECK(p.grad()[0] == doctest::Approx(0.6));
  CHECK(p.grad()[1] == doctest::Approx(0.8));
}

TEST_CASE("adam's first step moves each weight by the learning rate") {
  Tensor p = Tensor::from_vector({3}, {1.0, 1.0, 1.0});
  p.set_requires_grad(true);
  p.grad_buffer()[0] = 0.5;
  p.grad_buffer()[1] = -2.0;
  p.grad_buffer()[2] = 0.0;
  Adam adam({p}, 0.1);
  adam.step();
  CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.data()[1] == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(p.data()[2] == 1.0);
}

TEST_CASE("loss ablation with gamma 0 gives identical columns") {
  const fs::path dir = scratch_dir("ablate_gamma0");
  TrainConfig cfg = quick_config(dir, 3);
  cfg.loss.gamma = 0.0;
  const LabeledSet train_set = rendered_set("train", {"cat", "dog", "sun"});
  const std::vector<LabeledSet> evals{rendered_set("a", {"cat"}), rendered_set("b", {"dog", "sun"})};
  const AblationReport r = ablate_loss(tiny_model(3), cfg, train_set, evals);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.average.dataset == "Average");
  CHECK(r.average.size == 3);
  for (const AblationRow& row : r.rows) CHECK(row.first == row.second);
  CHECK(slurp(dir / "nll" / "final.ckpt") == slurp(dir / "focal" / "final.ckpt"));
  const auto files = r.write(dir, "report");
  REQUIRE(files.size() == 2);
  const auto j = nlohmann::json::parse(slurp(files[1]));
  CHECK(j["columns"].size() == 2);
  CHECK(j["rows"].size() == 2);
  CHECK(j["columns"][0] == "NLL");
  CHECK(j["columns"][1] == "Focal");
  CHECK(slurp(files[0]).find("Average\t3\t") != std::string::npos);
}

TEST_CASE("rectification ablation uses the same layout") {
  const fs::path dir = scratch_dir("ablate_rect");
  const LabeledSet train_set = rendered_set("train", {"cat", "dog"});
  const std::vector<LabeledSet> evals{rendered_set("curved", {"cat", "dog"})};
  const AblationReport r = ablate_rectification(tiny_model(3), quick_config(dir, 2), train_set, evals);
  CHECK(r.first_label == "Without rectification");
  CHECK(r.second_label == "With rectification");
  CHECK(r.rows.size() == 1);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["rows"][0].contains("Without rectification"));
  CHECK(j["rows"][0].contains("With rectification"));
}
