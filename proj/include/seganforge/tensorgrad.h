// tensorgrad.h

// Copyright 2026  The SeganForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode automatic differentiation over the fixed operation set
// the enhancement networks need: conv1d, conv_transpose1d, prelu, leaky_relu,
// tanh, channel concat, l1/mse losses, add, scale. Tensors follow the
// canonical batch x channels x length layout. Compute is float32 in
// production; every op is also instantiated for double so tests can run a
// float64 shadow of the same code path.

#ifndef SEGANFORGE_TENSORGRAD_H_
#define SEGANFORGE_TENSORGRAD_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "seganforge/common.h"

namespace seganforge {
namespace tg {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// When enabled (default), every forward op and every backward pass scans its
// outputs for NaN/Inf and raises a diagnostic error naming the op.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // sized lazily; zeroed at the start of each backward
  bool requires_grad = false;  // leaf flag
  bool needs_grad = false;     // true if this node or any ancestor requires grad
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void()> backward_fn;

  int64_t numel() const { return int64_t(values.size()); }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor from_values(const Shape& shape, std::vector<T> values,
                            bool requires_grad = false);
  static Tensor scalar(T value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim(size_t i) const { return node_->shape[i]; }
  int64_t numel() const { return node_->numel(); }

  std::vector<T>& values() { return node_->values; }
  const std::vector<T>& values() const { return node_->values; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  bool needs_grad() const { return node_->needs_grad; }

  // Value of a scalar (numel == 1) tensor.
  T item() const;

  // A leaf copy of the values, cut off from the graph.
  Tensor detach() const;

  // Reverse-mode sweep from this scalar tensor. Gradients of every node in
  // the reachable graph are recomputed from scratch (no cross-call
  // accumulation).
  void backward() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// y[b,co,t] = bias[co] + sum_{ci,k} x[b,ci,t*stride + k - pad] * w[co,ci,k]
// Lout = floor((L + 2*pad - K) / stride) + 1  (cross-correlation, zero pad)
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int64_t stride, int64_t pad);

// Adjoint of conv1d. w has shape [Cin, Cout, K].
// Lout = (L - 1)*stride - 2*pad + K + output_padding
template <typename T>
Tensor<T> conv_transpose1d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias, int64_t stride, int64_t pad,
                           int64_t output_padding = 0);

// Per-channel parametric ReLU; alpha has shape [C] and receives gradient.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);

template <typename T>
Tensor<T> tanh(const Tensor<T>& x);

// Concatenates along the channel axis; batch and length must match.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// Mean absolute error / mean squared error, reduced to a scalar.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// Metadata-level reshape (same element count).
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

// Named trainable array plus its RMSprop mean-square accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  std::vector<T> rms;  // same numel as tensor, starts at zero

  Parameter() = default;
  Parameter(std::string n, Tensor<T> t)
      : name(std::move(n)), tensor(std::move(t)),
        rms(size_t(tensor.numel()), T(0)) {}
};

struct RmspropOptions {
  double lr = 2e-4;
  double decay = 0.9;
  double eps = 1e-8;
};

// s <- decay*s + (1-decay)*g^2 ; p <- p - lr*g/(sqrt(s)+eps) ; grads zeroed.
// Raises if any parameter is missing its gradient.
template <typename T>
void rmsprop_step(const std::vector<Parameter<T>*>& params,
                  const RmspropOptions& opt);

using TensorF = Tensor<float>;
using ParameterF = Parameter<float>;

}  // namespace tg
}  // namespace seganforge

#endif  // SEGANFORGE_TENSORGRAD_H_
