// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/rectifier.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "strec/errors.hpp"
#include "strec/kernels.hpp"
#include "strec/ops.hpp"

namespace strec {

namespace {

// Largest acceptable condition number of the TPS system.
constexpr double kMaxCondition = 1e13;

Eigen::MatrixXd tps_system(const ControlPoints& target, double regularization) {
  const int k = static_cast<int>(target.size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k + 3, k + 3);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double dx = target[i].x - target[j].x;
      const double dy = target[i].y - target[j].y;
      l(i, j) = tps_kernel(dx * dx + dy * dy);
    }
    l(i, i) += regularization;
    l(i, k) = 1.0;
    l(i, k + 1) = target[i].x;
    l(i, k + 2) = target[i].y;
    l(k, i) = 1.0;
    l(k + 1, i) = target[i].x;
    l(k + 2, i) = target[i].y;
  }
  return l;
}

void check_condition(const Eigen::MatrixXd& l) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(l);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  const double condition = smallest > 0.0 ? s(0) / smallest : INFINITY;
  if (!std::isfinite(condition) || condition > kMaxCondition) {
    std::ostringstream os;
    os << "singular TPS system: condition number " << condition
       << " (target points collinear or duplicated?)";
    throw NumericalError(os.str());
  }
}

void validate_points(const ControlPoints& points, const char* what) {
  if (points.size() < 3) {
    throw ConfigError(std::string(what) + ": at least 3 control points required");
  }
}

// Row [U(|p - t_1|^2) .. U(|p - t_K|^2), 1, x, y].
void basis_row(const ControlPoints& anchors, Point2 p, double* row) {
  const std::size_t k = anchors.size();
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = p.x - anchors[i].x;
    const double dy = p.y - anchors[i].y;
    row[i] = tps_kernel(dx * dx + dy * dy);
  }
  row[k] = 1.0;
  row[k + 1] = p.x;
  row[k + 2] = p.y;
}

}  // namespace

ControlPoints canonical_layout(int num_points) {
  if (num_points < 4 || num_points % 2 != 0) {
    throw ConfigError("number of control points must be even and >= 4, got " +
                      std::to_string(num_points));
  }
  const int half = num_points / 2;
  ControlPoints points;
  points.reserve(static_cast<std::size_t>(num_points));
  for (const double y : {0.25, 0.75}) {
    for (int i = 0; i < half; ++i) points.push_back({(i + 0.5) / half, y});
  }
  return points;
}

double tps_kernel(double squared_distance) {
  return squared_distance > 0.0 ? squared_distance * std::log(squared_distance) : 0.0;
}

Point2 TpsTransform::map(Point2 p) const {
  const auto k = static_cast<Eigen::Index>(anchors.size());
  Eigen::RowVectorXd row(k + 3);
  basis_row(anchors, p, row.data());
  const Eigen::RowVector2d out = row * coefficients;
  return {out(0), out(1)};
}

TpsTransform solve_tps(const ControlPoints& source, const ControlPoints& target,
                       double regularization) {
  validate_points(target, "solve_tps");
  if (source.size() != target.size()) {
    throw ConfigError("solve_tps: source and target point counts differ");
  }
  if (!(regularization >= 0.0)) throw ConfigError("solve_tps: negative regularization");
  const int k = static_cast<int>(target.size());
  const Eigen::MatrixXd l = tps_system(target, regularization);
  check_condition(l);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k + 3, 2);
  for (int i = 0; i < k; ++i) {
    rhs(i, 0) = source[static_cast<std::size_t>(i)].x;
    rhs(i, 1) = source[static_cast<std::size_t>(i)].y;
  }
  TpsTransform t;
  t.anchors = target;
  t.coefficients = l.fullPivLu().solve(rhs);
  return t;
}

SamplingGrid build_sampling_grid(const TpsTransform& transform, int height, int width) {
  SamplingGrid grid{height, width, std::vector<double>(static_cast<std::size_t>(height) * width * 2)};
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const Point2 p = transform.map({(c + 0.5) / width, (r + 0.5) / height});
      const auto i = (static_cast<std::size_t>(r) * width + c) * 2;
      grid.coords[i] = p.x;
      grid.coords[i + 1] = p.y;
    }
  return grid;
}

SamplingGrid identity_grid(int height, int width) {
  SamplingGrid grid{height, width, std::vector<double>(static_cast<std::size_t>(height) * width * 2)};
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const auto i = (static_cast<std::size_t>(r) * width + c) * 2;
      grid.coords[i] = (c + 0.5) / width;
      grid.coords[i + 1] = (r + 0.5) / height;
    }
  return grid;
}

Tensor grid_to_tensor(const SamplingGrid& grid, std::int64_t batch) {
  std::vector<double> values;
  values.reserve(grid.coords.size() * static_cast<std::size_t>(batch));
  for (std::int64_t b = 0; b < batch; ++b)
    values.insert(values.end(), grid.coords.begin(), grid.coords.end());
  return Tensor::from_vector({batch, grid.height, grid.width, 2}, std::move(values));
}

Image sample(const Image& image, const SamplingGrid& grid) {
  const Image* src = &image;
  const Tensor x = images_to_tensor(std::span<const Image>(src, 1));
  NoGradGuard no_grad;
  return tensor_to_image(ops::grid_sample(x, grid_to_tensor(grid)));
}

TpsGridGenerator::TpsGridGenerator(const ControlPoints& target, int out_height, int out_width,
                                   double regularization)
    : num_points_(static_cast<int>(target.size())),
      out_height_(out_height),
      out_width_(out_width) {
  validate_points(target, "TpsGridGenerator");
  const int k = num_points_;
  const Eigen::MatrixXd l = tps_system(target, regularization);
  check_condition(l);
  const Eigen::MatrixXd inverse = l.fullPivLu().inverse();
  std::vector<double> solve(static_cast<std::size_t>((k + 3) * k));
  for (int i = 0; i < k + 3; ++i)
    for (int j = 0; j < k; ++j) solve[static_cast<std::size_t>(i * k + j)] = inverse(i, j);
  solve_matrix_ = Tensor::from_vector({k + 3, k}, std::move(solve));

  std::vector<double> basis(static_cast<std::size_t>(out_height) * out_width * (k + 3));
  for (int r = 0; r < out_height; ++r)
    for (int c = 0; c < out_width; ++c) {
      basis_row(target, {(c + 0.5) / out_width, (r + 0.5) / out_height},
                basis.data() + (static_cast<std::size_t>(r) * out_width + c) * (k + 3));
    }
  lattice_basis_ = Tensor::from_vector({static_cast<std::int64_t>(out_height) * out_width, k + 3},
                                       std::move(basis));
}

Tensor TpsGridGenerator::solve(const Tensor& source) const {
  if (source.ndim() != 3 || source.dim(1) != num_points_ || source.dim(2) != 2) {
    throw ShapeError("TpsGridGenerator: expected [B, " + std::to_string(num_points_) +
                     ", 2] source points, got " + shape_to_string(source.shape()));
  }
  return ops::apply_left(solve_matrix_, source);
}

Tensor TpsGridGenerator::grid(const Tensor& coefficients) const {
  const Tensor flat = ops::apply_left(lattice_basis_, coefficients);
  return ops::reshape(flat, {coefficients.dim(0), out_height_, out_width_, 2});
}

LocalizationNetwork::LocalizationNetwork(ParameterStore& store, const std::string& prefix,
                                         int in_channels, const LocalizationConfig& config,
                                         Rng& rng)
    : config_(config) {
  const int stages = static_cast<int>(config.channels.size());
  if (stages < 1 || (kRectifierInputHeight >> stages) < 1) {
    throw ConfigError("localization network: " + std::to_string(stages) +
                      " pooled conv stages do not fit a 64x256 input");
  }
  canonical_layout(config.num_points);  // validates K
  int channels = in_channels;
  for (int i = 0; i < stages; ++i) {
    const int out = config.channels[static_cast<std::size_t>(i)];
    if (out <= 0) throw ConfigError("localization network: non-positive channel count");
    convs_.push_back(Conv2d::create(store, prefix + ".conv" + std::to_string(i), channels, out,
                                    3, 1, 1, 1, true, rng));
    channels = out;
  }
  const std::int64_t flat = static_cast<std::int64_t>(channels) *
                            (kRectifierInputHeight >> stages) * (kRectifierInputWidth >> stages);
  fc1_ = Linear::create(store, prefix + ".fc1", flat, config.fc_units, rng);
  fc2_ = Linear::create(store, prefix + ".fc2", config.fc_units, 2 * config.num_points, rng);
  for (auto& v : fc2_.weight.mutable_data()) v = 0.0;
  const ControlPoints canonical = canonical_layout(config.num_points);
  auto bias = fc2_.bias.mutable_data();
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    bias[2 * i] = std::log(canonical[i].x / (1.0 - canonical[i].x));
    bias[2 * i + 1] = std::log(canonical[i].y / (1.0 - canonical[i].y));
  }
}

Tensor LocalizationNetwork::operator()(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(2) != kRectifierInputHeight || x.dim(3) != kRectifierInputWidth) {
    throw ShapeError("localization network: expected [B, C, 64, 256], got " +
                     shape_to_string(x.shape()));
  }
  Tensor h = x;
  for (const auto& conv : convs_) h = ops::max_pool2x2(ops::relu(conv(h)));
  const std::int64_t batch = x.dim(0);
  h = ops::reshape(h, {batch, h.numel() / batch});
  h = ops::relu(fc1_(h));
  h = ops::sigmoid(fc2_(h));
  return ops::reshape(h, {batch, config_.num_points, 2});
}

Rectifier::Rectifier(ParameterStore& store, const std::string& prefix, int channels,
                     const RectifierConfig& config, Rng& rng)
    : config_(config) {
  if (!config.enabled) return;
  localization_ = std::make_unique<LocalizationNetwork>(store, prefix + ".localization",
                                                        channels, config.localization, rng);
  generator_ = std::make_unique<TpsGridGenerator>(canonical_layout(config.localization.num_points),
                                                  kRectifiedHeight, kRectifiedWidth,
                                                  config.regularization);
}

Tensor Rectifier::control_points(const Tensor& resized) const {
  if (!localization_) throw ConfigError("rectification is disabled");
  return (*localization_)(resized);
}

Tensor Rectifier::operator()(const Tensor& resized) const {
  if (!config_.enabled) return plain_resize(resized);
  const Tensor grid = (*generator_)(control_points(resized));
  return ops::grid_sample(resized, grid);
}

Tensor Rectifier::plain_resize(const Tensor& resized) {
  if (resized.ndim() != 4 || resized.dim(2) != kRectifierInputHeight ||
      resized.dim(3) != kRectifierInputWidth) {
    throw ShapeError("rectifier: expected [B, C, 64, 256], got " + shape_to_string(resized.shape()));
  }
  return ops::grid_sample(resized, grid_to_tensor(identity_grid(), resized.dim(0)));
}

}  // namespace strec
