// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace strec {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;

// Backward function of a recorded op: (output gradient, output values,
// inputs). Accumulates into the inputs that require gradients.
using BackwardFn = std::function<void(std::span<const double>, std::span<const double>,
                                      std::vector<Tensor>&)>;

// A recorded operation in the autograd graph.
struct Node {
  std::vector<Tensor> inputs;
  BackwardFn backward;
  std::string name;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

// Dense row-major float64 tensor with reverse-mode automatic differentiation.
//
// Tensors are handles: copies share storage. Operations in `ops.hpp` always
// produce fresh contiguous results, so the only in-place mutation is through
// `mutable_data()` on leaves (parameter updates, buffers).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_vector(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int ndim() const;
  std::int64_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_buffer();  // allocates zeros on first use
  void zero_grad();

  // Back-propagates from this tensor. A scalar root is seeded with 1.
  void backward();
  void backward(std::span<const double> seed);

  // Same storage, no history.
  Tensor detach() const;
  // Independent storage copy, no history.
  Tensor clone() const;

  const std::shared_ptr<Node>& grad_fn() const;
  TensorImpl* impl() const { return impl_.get(); }

  // Builds an op result. When grad mode is on and any input requires a
  // gradient the result records `backward`.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, BackwardFn backward,
                            std::string name);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local switch for graph recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace strec
