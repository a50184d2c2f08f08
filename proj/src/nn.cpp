// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/nn.hpp"

#include <algorithm>
#include <cmath>

#include "strec/errors.hpp"
#include "strec/ops.hpp"

namespace strec {

void ParameterStore::check_unique(const std::string& name) const {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
}

Tensor ParameterStore::add_parameter(const std::string& name, Tensor value) {
  check_unique(name);
  value.set_requires_grad(true);
  parameters_.emplace_back(name, value);
  return value;
}

Tensor ParameterStore::add_buffer(const std::string& name, Tensor value) {
  check_unique(name);
  buffers_.emplace_back(name, value);
  return value;
}

std::vector<ParameterStore::Entry> ParameterStore::all() const {
  std::vector<Entry> out = parameters_;
  out.insert(out.end(), buffers_.begin(), buffers_.end());
  return out;
}

bool ParameterStore::contains(const std::string& name) const {
  auto same = [&](const Entry& e) { return e.first == name; };
  return std::any_of(parameters_.begin(), parameters_.end(), same) ||
         std::any_of(buffers_.begin(), buffers_.end(), same);
}

Tensor ParameterStore::find(const std::string& name) const {
  for (const auto& list : {&parameters_, &buffers_})
    for (const auto& [n, t] : *list)
      if (n == name) return t;
  throw ConfigError("unknown parameter '" + name + "'");
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : parameters_) t.zero_grad();
}

std::int64_t ParameterStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : parameters_) n += t.numel();
  return n;
}

Tensor kaiming_normal(Shape shape, std::int64_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor xavier_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.mutable_data()) v = rng.uniform(-limit, limit);
  return t;
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::int64_t in,
                      std::int64_t out, Rng& rng, bool with_bias) {
  Linear l;
  l.weight = store.add_parameter(name + ".weight", xavier_uniform({in, out}, in, out, rng));
  if (with_bias) l.bias = store.add_parameter(name + ".bias", Tensor::zeros({out}));
  return l;
}

Tensor Linear::operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }

Conv2d Conv2d::create(ParameterStore& store, const std::string& name, std::int64_t in,
                      std::int64_t out, int kernel, int stride_h, int stride_w, int pad,
                      bool with_bias, Rng& rng) {
  Conv2d c;
  c.weight = store.add_parameter(
      name + ".weight", kaiming_normal({out, in, kernel, kernel}, in * kernel * kernel, rng));
  if (with_bias) c.bias = store.add_parameter(name + ".bias", Tensor::zeros({out}));
  c.stride_h = stride_h;
  c.stride_w = stride_w;
  c.pad = pad;
  return c;
}

Tensor Conv2d::operator()(const Tensor& x) const {
  return ops::conv2d(x, weight, bias, stride_h, stride_w, pad, pad);
}

BatchNorm2d BatchNorm2d::create(ParameterStore& store, const std::string& name,
                                std::int64_t channels) {
  BatchNorm2d bn;
  bn.gamma = store.add_parameter(name + ".gamma", Tensor::full({channels}, 1.0));
  bn.beta = store.add_parameter(name + ".beta", Tensor::zeros({channels}));
  bn.running_mean = store.add_buffer(name + ".running_mean", Tensor::zeros({channels}));
  bn.running_var = store.add_buffer(name + ".running_var", Tensor::full({channels}, 1.0));
  return bn;
}

Tensor BatchNorm2d::operator()(const Tensor& x, bool training) const {
  Tensor mean = running_mean;
  Tensor var = running_var;
  return ops::batch_norm2d(x, gamma, beta, mean, var, training);
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, std::int64_t dim) {
  LayerNorm ln;
  ln.gamma = store.add_parameter(name + ".gamma", Tensor::full({dim}, 1.0));
  ln.beta = store.add_parameter(name + ".beta", Tensor::zeros({dim}));
  return ln;
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta); }

Embedding Embedding::create(ParameterStore& store, const std::string& name, std::int64_t vocab,
                            std::int64_t dim, Rng& rng) {
  Embedding e;
  Tensor table = Tensor::zeros({vocab, dim});
  for (auto& v : table.mutable_data()) v = rng.normal();
  e.table = store.add_parameter(name + ".table", std::move(table));
  return e;
}

}  // namespace strec
