// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "strec/errors.hpp"
#include "strec/objective.hpp"
#include "strec/vocabulary.hpp"
#include "test_util.hpp"

using namespace strec;
using strec::testing::gradient_error;
using strec::testing::leaf;
using strec::testing::random_tensor;

TEST_CASE("scalar focal values") {
  CHECK(focal_term(0.5, 1.0, 2.0) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-15));
  CHECK(focal_term(0.5, 1.0, 2.0) == doctest::Approx(0.17329).epsilon(1e-5));
  CHECK(focal_term(1.0, 1.0, 2.0) == 0.0);
  CHECK(focal_term(0.0, 1.0, 0.0) == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("uniform logits cost ln 97 per position") {
  const Tensor z = Tensor::zeros({3, Vocabulary::kSize});
  const std::vector<int> y{4, 7, Vocabulary::kEnd};
  CHECK(nll_loss(z, y).item() == doctest::Approx(std::log(97.0)).epsilon(1e-12));
  CHECK(focal_loss(z, y, 1.0, 0.0).item() == doctest::Approx(std::log(97.0)).epsilon(1e-12));
  const double q = 96.0 / 97.0;
  CHECK(focal_loss(z, y, 1.0, 2.0).item() == doctest::Approx(q * q * std::log(97.0)).epsilon(1e-12));
}

TEST_CASE("focal with gamma 0 is the likelihood loss") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor z = random_tensor({2, 4, 9}, rng, -4, 4);
    std::vector<int> y(8);
    for (int& v : y) v = static_cast<int>(rng.below(9));
    CHECK(std::abs(focal_loss(z, y, 1.0, 0.0).item() - nll_loss(z, y).item()) < 1e-12);
  }
}

TEST_CASE("analytic focal gradients match central differences") {
  Rng rng(2);
  for (const double gamma : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    Tensor z = leaf({2, 3, 5}, rng, -3, 3);
    std::vector<int> y{0, 4, 2, 1, 3, 3};
    CHECK(gradient_error([&] { return focal_loss(z, y, 0.75, gamma); }, z) < 1e-6);
  }
  Tensor z = leaf({4, 5}, rng, -3, 3);
  const std::vector<int> y{1, 2, 3, 4};
  CHECK(gradient_error([&] { return nll_loss(z, y); }, z) < 1e-6);
}

TEST_CASE("padding is excluded and each sequence is averaged over its own length") {
  Rng rng(3);
  const Tensor z = random_tensor({2, 3, 97}, rng);
  const int pad = Vocabulary::kPad;
  const std::vector<int> y{5, pad, pad, 6, 7, 8};
  const auto zv = z.to_vector();
  auto nll_at = [&](int row, int label) {
    const double* r = zv.data() + row * 97;
    double mx = r[0];
    for (int j = 1; j < 97; ++j) mx = std::max(mx, r[j]);
    double s = 0.0;
    for (int j = 0; j < 97; ++j) s += std::exp(r[j] - mx);
    return -(r[label] - mx - std::log(s));
  };
  const double want = 0.5 * (nll_at(0, 5) + (nll_at(3, 6) + nll_at(4, 7) + nll_at(5, 8)) / 3.0);
  CHECK(nll_loss(z, y).item() == doctest::Approx(want).epsilon(1e-12));
  const std::vector<int> empty{pad, pad, pad, 6, 7, 8};
  CHECK_THROWS_AS(nll_loss(z, empty), DataError);
  const std::vector<int> short_labels{1, 2};
  CHECK_THROWS_AS(nll_loss(z, short_labels), ShapeError);
}

TEST_CASE("loss configuration parsing and validation") {
  CHECK(parse_loss_family("focal") == LossFamily::kFocal);
  CHECK(parse_loss_family("nll") == LossFamily::kNll);
  CHECK_THROWS_AS(parse_loss_family("ce"), ConfigError);
  LossConfig cfg;
  cfg.gamma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.gamma = 2.0;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
