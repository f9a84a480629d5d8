// Copyright 2026 The htec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// Every op returns a new Tensor. When any input requires a gradient (and
// recording is not disabled by NoGradGuard) the result remembers its inputs
// and a backward rule; Tensor::backward() walks that graph in reverse
// topological order and accumulates gradients into every tracked input.
// Parameters are long-lived leaves whose gradients keep accumulating across
// graphs until zero_grad().

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace htec::tensor {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const;

  std::span<const double> data() const;
  /// Writable values. Only meaningful on leaves; writing into an
  /// intermediate does not update anything downstream.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  /// Gradient buffer; empty until a backward pass reaches this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Seeds d(this)/d(this) = 1 for every element and back-propagates.
  void backward() const;

  /// Same values, no graph history.
  Tensor detach() const;

  const Node* node() const { return node_.get(); }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Disables graph recording for its lifetime (per thread).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Backward rule for a custom op: receives the output gradient and must
/// return one gradient buffer per input (empty to skip an input).
using BackwardRule = std::function<std::vector<std::vector<double>>(std::span<const double> out_grad)>;

/// Builds an op from precomputed forward values and a backward rule.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardRule rule);

// Linear algebra. `a` may have any rank >= 2; its leading axes are
// flattened into rows. `b` is [k, n], or [n, k] when transpose_b is set.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
/// a[..., n] + row[n] broadcast over the leading axes.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);

/// Softmax along `axis` (negative counts from the end). `causal` masks
/// entries above the diagonal of a rank-2 input (axis must be the last).
Tensor softmax(const Tensor& a, int axis = -1, bool causal = false);
/// Normalizes the last axis, then applies gain and bias of that width.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);

/// Rows of `table` ([V, d]) selected by `ids`; repeated ids are allowed and
/// their gradients sum.
Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids);

/// Width-3 same-padded convolution along the middle axis of x[N, L, Cin]
/// with weight [3*Cin, Cout] (tap-major) and bias [Cout]; returns [N, L, Cout].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Reductions that drop `axis`. Max routes gradient to the first argmax.
Tensor max_pool(const Tensor& x, std::size_t axis);
Tensor mean_pool(const Tensor& x, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);

/// Sum over rows of -w[t] * log(max(softmax(logits)[t], 1e-12)) for
/// logits [n, C]. Rows with a negative target are skipped. Empty weights
/// mean 1 for every class.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const double> class_weights = {});

/// Largest elementwise |analytic - numeric| / max(|analytic|, |numeric|, 1e-4)
/// for the gradient of scalar f at x, using central differences with step h.
/// x must be a leaf that requires a gradient.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

/// Same check for a scalar loss over a set of parameter leaves. When
/// max_elements_per_tensor is nonzero only that many evenly spaced entries of
/// each tensor are probed.
double grad_check(const std::function<Tensor()>& loss, std::span<Tensor> params, double h = 1e-5,
                  std::size_t max_elements_per_tensor = 0);

}  // namespace htec::tensor
