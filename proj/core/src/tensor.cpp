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

#include "htec/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "htec/errors.hpp"

namespace htec::tensor {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Accumulates into the inputs' grad buffers from this node's grad.
  std::function<void(Node&)> backward;
};

struct TensorAccess {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

namespace {

thread_local bool g_grad_enabled = true;

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const MatR>;
using Map = Eigen::Map<MatR>;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error(ErrorCode::kShapeError, op + ": " + detail);
}

const std::shared_ptr<Node>& node_of(const Tensor& t) {
  if (!t.defined()) throw Error(ErrorCode::kShapeError, "use of an undefined tensor");
  return TensorAccess::node(t);
}

std::vector<double>& grad_buffer(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

// Creates the output node; records history only when some input is tracked.
Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (node_of(in)->requires_grad) n->requires_grad = true;
    }
    if (n->requires_grad) {
      for (const auto& in : inputs) n->inputs.push_back(node_of(in));
      n->backward = std::move(backward);
    }
  }
  return TensorAccess::wrap(std::move(n));
}

std::size_t rows_of(const Shape& s) {
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

// (outer, axis, inner) factorization of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_slope(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * pdf;
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = element_count(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (element_count(shape) != values.size()) {
    shape_error("Tensor::from", shape_string(shape) + " needs " + std::to_string(element_count(shape)) +
                                    " values, got " + std::to_string(values.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return node_of(*this)->shape; }
std::size_t Tensor::size() const { return node_of(*this)->value.size(); }
std::span<const double> Tensor::data() const { return node_of(*this)->value; }
std::span<double> Tensor::mutable_data() { return node_of(*this)->value; }

double Tensor::item() const {
  if (size() != 1) shape_error("item", "tensor of shape " + shape_string(shape()) + " is not a scalar");
  return data()[0];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }
std::span<const double> Tensor::grad() const { return node_of(*this)->grad; }
std::span<double> Tensor::mutable_grad() { return grad_buffer(*node_of(*this)); }

void Tensor::zero_grad() {
  auto& g = node_of(*this)->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::backward() const {
  const auto& root = node_of(*this);
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  auto& g = grad_buffer(*root);
  for (auto& v : g) v += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
}

Tensor Tensor::detach() const { return from(shape(), node_of(*this)->value, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardRule rule) {
  if (element_count(shape) != values.size()) shape_error("make_op", "value count does not match shape");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  if (g_grad_enabled) {
    for (const auto& in : inputs) n->requires_grad = n->requires_grad || node_of(in)->requires_grad;
  }
  if (n->requires_grad) {
    for (const auto& in : inputs) n->inputs.push_back(node_of(in));
    n->backward = [rule = std::move(rule)](Node& self) {
      auto grads = rule(self.grad);
      for (std::size_t i = 0; i < grads.size() && i < self.inputs.size(); ++i) {
        Node& in = *self.inputs[i];
        if (grads[i].empty() || !in.requires_grad) continue;
        if (grads[i].size() != in.value.size()) shape_error("make_op", "gradient size mismatch");
        auto& g = grad_buffer(in);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += grads[i][k];
      }
    };
  }
  return TensorAccess::wrap(std::move(n));
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() < 2 || b.rank() != 2) {
    shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = rows_of(a.shape()), k = a.shape().back();
  const std::size_t bk = transpose_b ? b.dim(1) : b.dim(0), n = transpose_b ? b.dim(0) : b.dim(1);
  if (bk != k) {
    shape_error("matmul", "inner dimensions differ: " + shape_string(a.shape()) + " x " +
                              shape_string(b.shape()) + (transpose_b ? "^T" : ""));
  }
  std::vector<double> out(m * n);
  MapC A(a.data().data(), m, k);
  MapC B(b.data().data(), b.dim(0), b.dim(1));
  Map C(out.data(), m, n);
  if (transpose_b) {
    C.noalias() = A * B.transpose();
  } else {
    C.noalias() = A * B;
  }
  Shape shape = a.shape();
  shape.back() = n;
  return make_result(std::move(shape), std::move(out), {a, b}, [m, k, n, transpose_b](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    MapC G(self.grad.data(), m, n);
    if (na.requires_grad) {
      Map dA(grad_buffer(na).data(), m, k);
      MapC B(nb.value.data(), nb.shape[0], nb.shape[1]);
      if (transpose_b) {
        dA.noalias() += G * B;
      } else {
        dA.noalias() += G * B.transpose();
      }
    }
    if (nb.requires_grad) {
      MapC A(na.value.data(), m, k);
      Map dB(grad_buffer(nb).data(), nb.shape[0], nb.shape[1]);
      if (transpose_b) {
        dB.noalias() += G.transpose() * A;
      } else {
        dB.noalias() += A.transpose() * G;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", shape_string(a.shape()) + " + " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& g = grad_buffer(*in);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  const std::size_t n = a.shape().back();
  if (row.size() != n) shape_error("add_row", shape_string(a.shape()) + " + " + shape_string(row.shape()));
  const std::size_t rows = a.size() / std::max<std::size_t>(n, 1);
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += row.data()[c];
  return make_result(a.shape(), std::move(out), {a, row}, [rows, n](Node& self) {
    Node& na = *self.inputs[0];
    Node& nr = *self.inputs[1];
    if (na.requires_grad) {
      auto& g = grad_buffer(na);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nr.requires_grad) {
      auto& g = grad_buffer(nr);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", shape_string(a.shape()) + " * " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto& g = grad_buffer(na);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      auto& g = grad_buffer(nb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0;
  for (double v : a.data()) s += v;
  return make_result({1}, {s}, {a}, [](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor softmax(const Tensor& a, int axis, bool causal) {
  const int r = static_cast<int>(a.rank());
  const int ax = axis < 0 ? axis + r : axis;
  if (ax < 0 || ax >= r) shape_error("softmax", "axis " + std::to_string(axis) + " out of range");
  if (causal && (r != 2 || ax != 1)) shape_error("softmax", "causal masking needs a rank-2 input, last axis");
  const auto sp = split_at(a.shape(), static_cast<std::size_t>(ax));
  const auto x = a.data();
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      // Causal rows only see columns 0..o.
      const std::size_t visible = causal ? std::min(sp.len, o + 1) : sp.len;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, x[base + j * sp.inner]);
      double z = 0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double e = std::exp(x[base + j * sp.inner] - mx);
        y[base + j * sp.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < visible; ++j) y[base + j * sp.inner] /= z;
    }
  }
  return make_result(a.shape(), std::move(y), {a}, [sp](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    const auto& yv = self.value;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        double dot = 0;
        for (std::size_t j = 0; j < sp.len; ++j) dot += self.grad[base + j * sp.inner] * yv[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.len; ++j) {
          const std::size_t idx = base + j * sp.inner;
          g[idx] += yv[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    shape_error("layer_norm", "input " + shape_string(x.shape()) + " with gain " + shape_string(gain.shape()));
  }
  const std::size_t rows = x.size() / std::max<std::size_t>(d, 1);
  std::vector<double> xhat(x.size()), inv_std(rows), out(x.size());
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < d; ++c) mean += xv[r * d + c];
    mean /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) var += (xv[r * d + c] - mean) * (xv[r * d + c] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat[r * d + c] = (xv[r * d + c] - mean) * inv_std[r];
      out[r * d + c] = xhat[r * d + c] * gv[c] + bv[c];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias},
                     [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       Node& nx = *self.inputs[0];
                       Node& ng = *self.inputs[1];
                       Node& nb = *self.inputs[2];
                       const auto& G = self.grad;
                       if (ng.requires_grad || nb.requires_grad) {
                         auto& dg = grad_buffer(ng);
                         auto& db = grad_buffer(nb);
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < d; ++c) {
                             dg[c] += G[r * d + c] * xhat[r * d + c];
                             db[c] += G[r * d + c];
                           }
                         }
                       }
                       if (!nx.requires_grad) return;
                       auto& dx = grad_buffer(nx);
                       const double inv_d = 1.0 / static_cast<double>(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         double s1 = 0, s2 = 0;
                         for (std::size_t c = 0; c < d; ++c) {
                           const double gh = G[r * d + c] * ng.value[c];
                           s1 += gh;
                           s2 += gh * xhat[r * d + c];
                         }
                         for (std::size_t c = 0; c < d; ++c) {
                           const double gh = G[r * d + c] * ng.value[c];
                           dx[r * d + c] += inv_std[r] * (gh - inv_d * s1 - xhat[r * d + c] * inv_d * s2);
                         }
                       }
                     });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = std::max(v, 0.0);
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += in.value[i] > 0 ? self.grad[i] : 0.0;
  });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(a.data()[i]);
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * gelu_slope(in.value[i]);
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::int32_t> ids) {
  if (table.rank() != 2) shape_error("embedding_lookup", "table must be rank 2, got " + shape_string(table.shape()));
  const std::size_t v = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= v) {
      shape_error("embedding_lookup", "id " + std::to_string(ids[r]) + " outside table of " + std::to_string(v));
    }
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(ids[r] * d), d, out.begin() + r * d);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), {table}, [idv = std::move(idv), d](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t r = 0; r < idv.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) g[static_cast<std::size_t>(idv[r]) * d + c] += self.grad[r * d + c];
  });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3) shape_error("conv1d", "input must be [N, L, C], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), l = x.dim(1), cin = x.dim(2);
  if (weight.rank() != 2 || weight.dim(0) != 3 * cin) {
    shape_error("conv1d", "weight " + shape_string(weight.shape()) + " does not match input channels " +
                              std::to_string(cin));
  }
  const std::size_t cout = weight.dim(1);
  if (bias.size() != cout) shape_error("conv1d", "bias " + shape_string(bias.shape()));

  // im2col: row (b, t) holds x[b, t-1], x[b, t], x[b, t+1] with zero padding.
  std::vector<double> cols(n * l * 3 * cin, 0.0);
  const auto xv = x.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < l; ++t) {
      double* row = cols.data() + (b * l + t) * 3 * cin;
      for (std::size_t k = 0; k < 3; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - 1;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(l)) continue;
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((b * l + static_cast<std::size_t>(src)) * cin), cin,
                    row + k * cin);
      }
    }
  }
  const std::size_t m = n * l;
  std::vector<double> out(m * cout);
  Map O(out.data(), m, cout);
  O.noalias() = MapC(cols.data(), m, 3 * cin) * MapC(weight.data().data(), 3 * cin, cout);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < cout; ++c) out[r * cout + c] += bias.data()[c];

  return make_result({n, l, cout}, std::move(out), {x, weight, bias},
                     [n, l, cin, cout, m, cols = std::move(cols)](Node& self) {
                       Node& nx = *self.inputs[0];
                       Node& nw = *self.inputs[1];
                       Node& nb = *self.inputs[2];
                       MapC G(self.grad.data(), m, cout);
                       if (nw.requires_grad) {
                         Map dW(grad_buffer(nw).data(), 3 * cin, cout);
                         dW.noalias() += MapC(cols.data(), m, 3 * cin).transpose() * G;
                       }
                       if (nb.requires_grad) {
                         auto& db = grad_buffer(nb);
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t c = 0; c < cout; ++c) db[c] += self.grad[r * cout + c];
                       }
                       if (!nx.requires_grad) return;
                       MatR dcols = G * MapC(nw.value.data(), 3 * cin, cout).transpose();
                       auto& dx = grad_buffer(nx);
                       for (std::size_t b = 0; b < n; ++b) {
                         for (std::size_t t = 0; t < l; ++t) {
                           const double* row = dcols.data() + (b * l + t) * 3 * cin;
                           for (std::size_t k = 0; k < 3; ++k) {
                             const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - 1;
                             if (src < 0 || src >= static_cast<std::ptrdiff_t>(l)) continue;
                             double* dst = dx.data() + (b * l + static_cast<std::size_t>(src)) * cin;
                             for (std::size_t c = 0; c < cin; ++c) dst[c] += row[k * cin + c];
                           }
                         }
                       }
                     });
}

namespace {

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Tensor max_pool(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank() || x.dim(axis) == 0) shape_error("max_pool", "bad axis for " + shape_string(x.shape()));
  const auto sp = split_at(x.shape(), axis);
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(out.size());
  const auto xv = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      std::size_t best = base;
      for (std::size_t j = 1; j < sp.len; ++j)
        if (xv[base + j * sp.inner] > xv[best]) best = base + j * sp.inner;
      out[o * sp.inner + in] = xv[best];
      arg[o * sp.inner + in] = best;
    }
  }
  return make_result(drop_axis(x.shape(), axis), std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
  });
}

Tensor mean_pool(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank() || x.dim(axis) == 0) shape_error("mean_pool", "bad axis for " + shape_string(x.shape()));
  const auto sp = split_at(x.shape(), axis);
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  const auto xv = x.data();
  const double inv = 1.0 / static_cast<double>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.len; ++j)
      for (std::size_t in = 0; in < sp.inner; ++in)
        out[o * sp.inner + in] += inv * xv[(o * sp.len + j) * sp.inner + in];
  return make_result(drop_axis(x.shape(), axis), std::move(out), {x}, [sp, inv](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < sp.len; ++j)
        for (std::size_t in = 0; in < sp.inner; ++in)
          g[(o * sp.len + j) * sp.inner + in] += inv * self.grad[o * sp.inner + in];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) shape_error("concat", "axis out of range");
  std::size_t total = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) shape_error("concat", "rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != shape[i]) shape_error("concat", shape_string(s) + " vs " + shape_string(shape));
    lens.push_back(s[axis]);
    total += s[axis];
  }
  shape[axis] = total;
  const auto sp = split_at(shape, axis);
  std::vector<double> out(element_count(shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].data();
    const std::size_t chunk = lens[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * total * sp.inner + offset * sp.inner));
    offset += lens[p];
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(out);
  if (g_grad_enabled) {
    for (const auto& p : parts) n->requires_grad = n->requires_grad || node_of(p)->requires_grad;
  }
  if (n->requires_grad) {
    for (const auto& p : parts) n->inputs.push_back(node_of(p));
    n->backward = [sp, total, lens](Node& self) {
      std::size_t off = 0;
      for (std::size_t p = 0; p < self.inputs.size(); ++p) {
        Node& in = *self.inputs[p];
        const std::size_t chunk = lens[p] * sp.inner;
        if (in.requires_grad) {
          auto& g = grad_buffer(in);
          for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t q = 0; q < chunk; ++q) g[o * chunk + q] += self.grad[o * total * sp.inner + off * sp.inner + q];
        }
        off += lens[p];
      }
    };
  }
  return TensorAccess::wrap(std::move(n));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis)) {
    shape_error("slice", "[" + std::to_string(start) + ", " + std::to_string(start + length) + ") on axis " +
                             std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  const auto sp = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = length;
  std::vector<double> out(element_count(shape));
  const auto v = x.data();
  const std::size_t chunk = length * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * sp.len * sp.inner + start * sp.inner), chunk,
                out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  return make_result(std::move(shape), std::move(out), {x}, [sp, start, chunk](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t q = 0; q < chunk; ++q) g[o * sp.len * sp.inner + start * sp.inner + q] += self.grad[o * chunk + q];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    shape_error("reshape", shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const double> class_weights) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    shape_error("cross_entropy", "logits " + shape_string(logits.shape()) + " for " +
                                     std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (!class_weights.empty() && class_weights.size() != c) shape_error("cross_entropy", "class weight count");
  constexpr double kFloor = 1e-12;
  std::vector<double> probs(n * c);
  double loss = 0;
  const auto lv = logits.data();
  for (std::size_t r = 0; r < n; ++r) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, lv[r * c + k]);
    double z = 0;
    for (std::size_t k = 0; k < c; ++k) z += (probs[r * c + k] = std::exp(lv[r * c + k] - mx));
    for (std::size_t k = 0; k < c; ++k) probs[r * c + k] /= z;
    const auto t = targets[r];
    if (t < 0) continue;
    if (static_cast<std::size_t>(t) >= c) shape_error("cross_entropy", "target " + std::to_string(t) + " >= " + std::to_string(c));
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(t)];
    loss -= w * std::log(std::max(probs[r * c + static_cast<std::size_t>(t)], kFloor));
  }
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  std::vector<double> wv(class_weights.begin(), class_weights.end());
  return make_result({1}, {loss}, {logits},
                     [n, c, probs = std::move(probs), tv = std::move(tv), wv = std::move(wv)](Node& self) {
                       auto& g = grad_buffer(*self.inputs[0]);
                       const double up = self.grad[0];
                       for (std::size_t r = 0; r < n; ++r) {
                         const auto t = tv[r];
                         if (t < 0) continue;
                         const auto ti = static_cast<std::size_t>(t);
                         // Below the floor the loss is flat in the logits.
                         if (probs[r * c + ti] < kFloor) continue;
                         const double w = (wv.empty() ? 1.0 : wv[ti]) * up;
                         for (std::size_t k = 0; k < c; ++k)
                           g[r * c + k] += w * (probs[r * c + k] - (k == ti ? 1.0 : 0.0));
                       }
                     });
}

namespace {

double relative_error(double analytic, double numeric) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / den;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
  std::vector<Tensor> params{std::move(x)};
  const Tensor& leaf = params.front();
  return grad_check([&] { return f(leaf); }, params, h);
}

double grad_check(const std::function<Tensor()>& loss, std::span<Tensor> params, double h,
                  std::size_t max_elements_per_tensor) {
  for (auto& p : params) {
    if (!p.requires_grad()) throw Error(ErrorCode::kShapeError, "grad_check: parameter does not require a gradient");
    p.zero_grad();
  }
  loss().backward();
  double worst = 0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    if (analytic.empty()) analytic.assign(p.size(), 0.0);
    const std::size_t n = p.size();
    const std::size_t probes = max_elements_per_tensor == 0 ? n : std::min(n, max_elements_per_tensor);
    for (std::size_t q = 0; q < probes; ++q) {
      const std::size_t i = probes == n ? q : q * n / probes;
      auto values = p.mutable_data();
      const double saved = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = saved + h;
        plus = loss().item();
        values[i] = saved - h;
        minus = loss().item();
      }
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace htec::tensor
