// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "strec/errors.hpp"
#include "strec/image.hpp"
#include "strec/nn.hpp"
#include "strec/ops.hpp"
#include "strec/rectifier.hpp"
#include "test_util.hpp"

using namespace strec;
using strec::testing::gradient_error;
using strec::testing::leaf;
using strec::testing::max_abs_diff;
using strec::testing::probe;

namespace {

Image random_image(int h, int w, int c, Rng& rng) {
  Image img(h, w, c);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

RectifierConfig small_rectifier() {
  RectifierConfig cfg;
  cfg.localization.channels = {4, 4, 8, 8, 8, 8};
  cfg.localization.fc_units = 16;
  return cfg;
}

}  // namespace

TEST_CASE("radial kernel values") {
  CHECK(tps_kernel(0.0) == 0.0);
  CHECK(tps_kernel(1.0) == 0.0);
  CHECK(tps_kernel(4.0) == doctest::Approx(4.0 * std::log(4.0)).epsilon(1e-15));
  CHECK(tps_kernel(std::exp(1.0)) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
}

TEST_CASE("canonical layout places two rows of evenly spaced points") {
  const ControlPoints p = canonical_layout(20);
  REQUIRE(p.size() == 20);
  for (int i = 0; i < 10; ++i) {
    CHECK(p[static_cast<std::size_t>(i)].y == 0.25);
    CHECK(p[static_cast<std::size_t>(i + 10)].y == 0.75);
    CHECK(p[static_cast<std::size_t>(i)].x == doctest::Approx((i + 0.5) / 10.0));
  }
  CHECK_THROWS_AS(canonical_layout(5), ConfigError);
}

TEST_CASE("tps interpolates its control points") {
  Rng rng(1);
  const ControlPoints target = canonical_layout(20);
  ControlPoints source = target;
  for (Point2& p : source) {
    p.x += rng.uniform(-0.05, 0.05);
    p.y += rng.uniform(-0.1, 0.1);
  }
  const TpsTransform t = solve_tps(source, target, 0.0);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Point2 q = t.map(target[i]);
    CHECK(std::abs(q.x - source[i].x) < 1e-9);
    CHECK(std::abs(q.y - source[i].y) < 1e-9);
  }
}

TEST_CASE("tps reproduces affine maps everywhere") {
  const ControlPoints target = canonical_layout(10);
  ControlPoints source;
  auto affine = [](Point2 p) { return Point2{0.1 + 0.9 * p.x - 0.2 * p.y, -0.05 + 0.3 * p.x + 1.1 * p.y}; };
  for (const Point2& p : target) source.push_back(affine(p));
  const TpsTransform t = solve_tps(source, target, 0.0);
  for (double x = 0.0; x <= 1.0; x += 0.125) {
    for (double y = 0.0; y <= 1.0; y += 0.25) {
      const Point2 got = t.map({x, y});
      const Point2 want = affine({x, y});
      CHECK(std::abs(got.x - want.x) < 1e-9);
      CHECK(std::abs(got.y - want.y) < 1e-9);
    }
  }
}

TEST_CASE("identity sampling equals the bilinear resize") {
  Rng rng(2);
  const Image img = random_image(64, 256, 3, rng);
  const Image a = sample(img, build_sampling_grid(solve_tps(canonical_layout(20), canonical_layout(20))));
  const Image b = resize_bilinear(img, kRectifiedHeight, kRectifiedWidth);
  CHECK(max_abs_diff(a.pixels, b.pixels) < 1e-9);
}

TEST_CASE("differentiable grid generator matches the direct solve") {
  Rng rng(3);
  const ControlPoints target = canonical_layout(8);
  ControlPoints source = target;
  std::vector<double> flat;
  for (Point2& p : source) {
    p.x += rng.uniform(-0.05, 0.05);
    p.y += rng.uniform(-0.05, 0.05);
    flat.push_back(p.x);
    flat.push_back(p.y);
  }
  const TpsGridGenerator gen(target, 6, 9, 1e-6);
  const auto grid = gen(Tensor::from_vector({1, 8, 2}, flat)).to_vector();
  const SamplingGrid direct = build_sampling_grid(solve_tps(source, target, 1e-6), 6, 9);
  CHECK(max_abs_diff(grid, direct.coords) < 1e-9);
}

TEST_CASE("grid generator gradient with respect to the control points") {
  Rng rng(4);
  const TpsGridGenerator gen(canonical_layout(6), 4, 5, 1e-6);
  Tensor src = leaf({2, 6, 2}, rng, 0.1, 0.9);
  CHECK(gradient_error([&] { return probe(gen(src)); }, src) < 1e-6);
}

TEST_CASE("fresh rectifier reproduces the plain resize") {
  Rng rng(5);
  ParameterStore store;
  const Rectifier rect(store, "rect", 3, small_rectifier(), rng);
  std::vector<Image> imgs{random_image(64, 256, 3, rng), random_image(64, 256, 3, rng)};
  const Tensor x = images_to_tensor(imgs);
  const Tensor cp = rect.control_points(x);
  const ControlPoints canon = canonical_layout(20);
  const auto pts = cp.to_vector();
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(pts[2 * i] == doctest::Approx(canon[i].x).epsilon(1e-12));
    CHECK(pts[2 * i + 1] == doctest::Approx(canon[i].y).epsilon(1e-12));
  }
  CHECK(max_abs_diff(rect(x).to_vector(), Rectifier::plain_resize(x).to_vector()) < 1e-5);
}

TEST_CASE("disabled rectifier is bit-identical to the plain resize") {
  Rng rng(6);
  ParameterStore store;
  RectifierConfig cfg = small_rectifier();
  cfg.enabled = false;
  const Rectifier rect(store, "rect", 1, cfg, rng);
  std::vector<Image> imgs{random_image(64, 256, 1, rng)};
  const Tensor x = images_to_tensor(imgs);
  const auto a = rect(x).to_vector();
  const auto b = Rectifier::plain_resize(x).to_vector();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  CHECK_THROWS_AS(Rectifier::plain_resize(Tensor::zeros({1, 1, 32, 100})), ShapeError);
}

TEST_CASE("rectifier gradients reach the localization network") {
  Rng rng(7);
  ParameterStore store;
  RectifierConfig cfg = small_rectifier();
  cfg.localization.num_points = 4;
  const Rectifier rect(store, "rect", 1, cfg, rng);
  std::vector<Image> imgs{random_image(64, 256, 1, rng)};
  const Tensor x = images_to_tensor(imgs);
  probe(rect(x)).backward();
  bool any = false;
  for (const auto& [name, p] : store.parameters()) {
    if (name.find("fc2.bias") == std::string::npos || !p.has_grad()) continue;
    for (const double g : p.grad()) any = any || g != 0.0;
  }
  CHECK(any);
}
