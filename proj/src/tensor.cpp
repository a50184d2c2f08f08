// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "strec/errors.hpp"

namespace strec {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto impl = std::make_shared<TensorImpl>();
  const auto n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("from_vector: " + std::to_string(values.size()) +
                     " values for shape " + shape_to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from_vector({}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::int64_t Tensor::dim(int axis) const {
  const int n = ndim();
  if (axis < 0) axis += n;
  if (axis < 0 || axis >= n) throw ShapeError("axis out of range");
  return impl_->shape[static_cast<std::size_t>(axis)];
}

int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(impl_->data->size());
}

std::span<const double> Tensor::data() const { return *impl_->data; }
std::span<double> Tensor::mutable_data() { return *impl_->data; }
std::vector<double> Tensor::to_vector() const { return *impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor " + shape_to_string(shape()));
  return (*impl_->data)[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != ndim()) throw ShapeError("at(): wrong rank");
  std::int64_t flat = 0;
  int axis = 0;
  for (auto i : index) {
    const auto d = impl_->shape[static_cast<std::size_t>(axis++)];
    if (i < 0 || i >= d) throw ShapeError("at(): index out of range");
    flat = flat * d + i;
  }
  return (*impl_->data)[static_cast<std::size_t>(flat)];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_buffer() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data->size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

const std::shared_ptr<Node>& Tensor::grad_fn() const { return impl_->grad_fn; }

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  return from_vector(impl_->shape, *impl_->data);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs, BackwardFn backward,
                           std::string name) {
  Tensor out = from_vector(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<Node>();
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  node->name = std::move(name);
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
  return out;
}

void Tensor::backward() {
  if (numel() != 1) {
    throw ShapeError("backward() without seed needs a scalar, got " +
                     shape_to_string(shape()));
  }
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) {
  if (static_cast<std::int64_t>(seed.size()) != numel()) {
    throw ShapeError("backward seed size mismatch");
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<Tensor> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<Tensor, std::size_t>> stack;
  stack.emplace_back(*this, 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const auto& fn = t.impl_->grad_fn;
    if (fn && next < fn->inputs.size()) {
      Tensor child = fn->inputs[next++];
      if (child.requires_grad() && visited.insert(child.impl_.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }

  auto g = grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& impl = *it->impl_;
    if (!impl.grad_fn || impl.grad.empty()) continue;
    impl.grad_fn->backward(impl.grad, *impl.data, impl.grad_fn->inputs);
    // Interior gradients are no longer needed once propagated.
    std::vector<double>().swap(impl.grad);
  }
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected " + shape_to_string(expected) +
                     ", got " + shape_to_string(t.shape()));
  }
}

}  // namespace strec
