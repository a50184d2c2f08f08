// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Named parameter storage and the small layer types the model is built
// from. Layers hold tensor handles into a ParameterStore, so loading a
// checkpoint into the store updates every layer in place.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "strec/random.hpp"
#include "strec/tensor.hpp"

namespace strec {

// Training/inference switch plus the dropout generator.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  // Registers a trainable tensor. Names must be unique.
  Tensor add_parameter(const std::string& name, Tensor value);
  // Registers non-trainable state (e.g. batch-norm running statistics).
  Tensor add_buffer(const std::string& name, Tensor value);

  const std::vector<Entry>& parameters() const { return parameters_; }
  const std::vector<Entry>& buffers() const { return buffers_; }
  // Parameters followed by buffers, in registration order.
  std::vector<Entry> all() const;

  // Throws ConfigError for an unknown name.
  Tensor find(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  std::int64_t parameter_count() const;

 private:
  void check_unique(const std::string& name) const;

  std::vector<Entry> parameters_;
  std::vector<Entry> buffers_;
};

Tensor kaiming_normal(Shape shape, std::int64_t fan_in, Rng& rng);
Tensor xavier_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear create(ParameterStore& store, const std::string& name, std::int64_t in,
                       std::int64_t out, Rng& rng, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
};

struct Conv2d {
  Tensor weight;  // [out, in, kh, kw]
  Tensor bias;    // [out] or undefined
  int stride_h = 1;
  int stride_w = 1;
  int pad = 0;

  static Conv2d create(ParameterStore& store, const std::string& name, std::int64_t in,
                       std::int64_t out, int kernel, int stride_h, int stride_w, int pad,
                       bool with_bias, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct BatchNorm2d {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  static BatchNorm2d create(ParameterStore& store, const std::string& name,
                            std::int64_t channels);
  Tensor operator()(const Tensor& x, bool training) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(ParameterStore& store, const std::string& name, std::int64_t dim);
  Tensor operator()(const Tensor& x) const;
};

struct Embedding {
  Tensor table;  // [vocab, dim]

  static Embedding create(ParameterStore& store, const std::string& name, std::int64_t vocab,
                          std::int64_t dim, Rng& rng);
};

}  // namespace strec
