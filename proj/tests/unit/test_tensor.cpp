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

#include <doctest.h>

#include <cmath>
#include <random>

#include "htec/errors.hpp"
#include "htec/tensor.hpp"

using namespace htec::tensor;

namespace {

constexpr double kTol = 1e-4;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool grad = true, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = n(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

// Weighted sum so that every output element carries a distinct gradient.
// The weights depend only on the shape, so repeated evaluations agree.
Tensor probe(const Tensor& y) {
  std::mt19937_64 fixed(element_count(y.shape()));
  return sum(mul(y, random_tensor(y.shape(), fixed, false)));
}

double check(std::vector<Tensor> params, const std::function<Tensor()>& loss) {
  return grad_check(loss, params);
}

}  // namespace

TEST_CASE("sum of squares gradient is 2x") {
  std::mt19937_64 rng(1);
  auto x = random_tensor({3, 4}, rng);
  auto f = [](const Tensor& t) { return sum(mul(t, t)); };
  f(x).backward();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.at(i)).epsilon(1e-12));
  x.zero_grad();
  CHECK(grad_check(f, x) < 1e-6);
}

TEST_CASE("elementwise and linear ops match finite differences") {
  std::mt19937_64 rng(2);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  auto w = random_tensor({4, 5}, rng), wt = random_tensor({5, 4}, rng), row = random_tensor({4}, rng);
  auto r1 = random_tensor({3, 5}, rng, false), r2 = random_tensor({3, 4}, rng, false);
  CHECK(check({a, w}, [&] { return sum(mul(matmul(a, w), r1)); }) < kTol);
  CHECK(check({a, wt}, [&] { return sum(mul(matmul(a, wt, true), r1)); }) < kTol);
  CHECK(check({a, b}, [&] { return sum(mul(add(a, b), mul(a, r2))); }) < kTol);
  CHECK(check({a, row}, [&] { return sum(mul(add_row(a, row), r2)); }) < kTol);
  CHECK(check({a}, [&] { return sum(mul(scale(a, -2.5), r2)); }) < kTol);
  CHECK(check({a}, [&] { return sum(mul(gelu(a), r2)); }) < kTol);

  // Keep relu inputs away from the kink.
  auto c = random_tensor({3, 4}, rng);
  for (auto& v : c.mutable_data()) v += v > 0 ? 0.1 : -0.1;
  CHECK(check({c}, [&] { return sum(mul(relu(c), r2)); }) < kTol);

  auto rank3 = random_tensor({2, 3, 4}, rng), w3 = random_tensor({4, 2}, rng);
  CHECK(check({rank3, w3}, [&] { return probe(matmul(rank3, w3)); }) < kTol);
}

TEST_CASE("softmax and layer norm match finite differences") {
  std::mt19937_64 rng(3);
  auto x = random_tensor({4, 5}, rng);
  auto r = random_tensor({4, 5}, rng, false);
  CHECK(check({x}, [&] { return sum(mul(softmax(x, -1), r)); }) < kTol);
  CHECK(check({x}, [&] { return sum(mul(softmax(x, 0), r)); }) < kTol);
  auto sq = random_tensor({4, 4}, rng);
  auto rs = random_tensor({4, 4}, rng, false);
  CHECK(check({sq}, [&] { return sum(mul(softmax(sq, -1, true), rs)); }) < kTol);
  auto x3 = random_tensor({2, 3, 4}, rng);
  auto r3 = random_tensor({2, 3, 4}, rng, false);
  CHECK(check({x3}, [&] { return sum(mul(softmax(x3, 1), r3)); }) < kTol);

  auto gain = random_tensor({5}, rng), bias = random_tensor({5}, rng);
  CHECK(check({x, gain, bias}, [&] { return sum(mul(layer_norm(x, gain, bias), r)); }) < kTol);
}

TEST_CASE("lookup, convolution and pooling match finite differences") {
  std::mt19937_64 rng(4);
  auto table = random_tensor({6, 3}, rng);
  const std::vector<std::int32_t> ids{1, 4, 1, 0};
  auto r = random_tensor({4, 3}, rng, false);
  CHECK(check({table}, [&] { return sum(mul(embedding_lookup(table, ids), r)); }) < kTol);

  auto x = random_tensor({2, 5, 3}, rng), w = random_tensor({9, 4}, rng), b = random_tensor({4}, rng);
  auto rc = random_tensor({2, 5, 4}, rng, false);
  CHECK(check({x, w, b}, [&] { return sum(mul(conv1d(x, w, b), rc)); }) < kTol);

  auto p = random_tensor({2, 5, 3}, rng);
  auto rp = random_tensor({2, 3}, rng, false);
  CHECK(check({p}, [&] { return sum(mul(max_pool(p, 1), rp)); }) < kTol);
  CHECK(check({p}, [&] { return sum(mul(mean_pool(p, 1), rp)); }) < kTol);
  auto rp0 = random_tensor({5, 3}, rng, false);
  CHECK(check({p}, [&] { return sum(mul(mean_pool(p, 0), rp0)); }) < kTol);
}

TEST_CASE("structural ops match finite differences") {
  std::mt19937_64 rng(5);
  auto a = random_tensor({2, 3}, rng), b = random_tensor({4, 3}, rng), c = random_tensor({2, 2}, rng);
  CHECK(check({a, b}, [&] { return probe(concat({a, b}, 0)); }) < kTol);
  CHECK(check({a, c}, [&] { return probe(concat({a, c}, 1)); }) < kTol);
  CHECK(check({b}, [&] { return probe(slice(b, 0, 1, 2)); }) < kTol);
  CHECK(check({b}, [&] { return probe(slice(b, 1, 1, 2)); }) < kTol);
  CHECK(check({b}, [&] { return probe(reshape(b, {3, 4})); }) < kTol);
}

TEST_CASE("cross entropy matches finite differences") {
  std::mt19937_64 rng(6);
  auto logits = random_tensor({4, 7}, rng);
  const std::vector<std::int32_t> targets{0, 3, -1, 6};
  const std::vector<double> weights{0.2, 1, 1, 2.5, 1, 1, 0.7};
  CHECK(check({logits}, [&] { return cross_entropy(logits, targets); }) < kTol);
  CHECK(check({logits}, [&] { return cross_entropy(logits, targets, weights); }) < kTol);
}

TEST_CASE("chained graph with shared subexpressions") {
  std::mt19937_64 rng(7);
  auto x = random_tensor({3, 4}, rng), w = random_tensor({4, 4}, rng);
  auto loss = [&] {
    auto h = matmul(x, w);
    auto g = gelu(h);
    return sum(mul(softmax(add(g, h), -1), h));
  };
  CHECK(check({x, w}, loss) < kTol);
}

TEST_CASE("a broken backward rule is caught") {
  std::mt19937_64 rng(8);
  auto x = random_tensor({3, 3}, rng);
  // y = x^2 whose backward claims dy/dx = x instead of 2x.
  auto bad_square = [](const Tensor& t) {
    std::vector<double> v(t.data().begin(), t.data().end());
    for (auto& e : v) e *= e;
    std::vector<double> xs(t.data().begin(), t.data().end());
    return make_op(t.shape(), v, {t}, [xs](std::span<const double> g) {
      std::vector<double> dx(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) dx[i] = g[i] * xs[i];
      return std::vector<std::vector<double>>{dx};
    });
  };
  CHECK(grad_check([&](const Tensor& t) { return sum(bad_square(t)); }, x) > 1e-2);

  auto good_square = [](const Tensor& t) {
    std::vector<double> v(t.data().begin(), t.data().end());
    for (auto& e : v) e *= e;
    std::vector<double> xs(t.data().begin(), t.data().end());
    return make_op(t.shape(), v, {t}, [xs](std::span<const double> g) {
      std::vector<double> dx(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) dx[i] = 2 * g[i] * xs[i];
      return std::vector<std::vector<double>>{dx};
    });
  };
  CHECK(grad_check([&](const Tensor& t) { return sum(good_square(t)); }, x) < kTol);
}

TEST_CASE("softmax normalizes and causal rows ignore the future") {
  std::mt19937_64 rng(9);
  auto x = random_tensor({8, 16}, rng, false, 3.0);
  auto y = softmax(x);
  for (std::size_t r = 0; r < 8; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 16; ++c) s += y.at(r * 16 + c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  auto sq = random_tensor({4, 4}, rng, false);
  auto yc = softmax(sq, -1, true);
  CHECK(yc.at(0) == doctest::Approx(1.0));
  CHECK(yc.at(1) == 0.0);
  CHECK(yc.at(2 * 4 + 3) == 0.0);
  auto huge = Tensor::from({1, 3}, {1000.0, -1000.0, 999.0});
  for (double v : softmax(huge).data()) CHECK(std::isfinite(v));
}

TEST_CASE("cross entropy limits and floor") {
  auto confident = Tensor::from({1, 3}, {60.0, 0.0, 0.0});
  const std::vector<std::int32_t> t0{0}, t1{1};
  CHECK(cross_entropy(confident, t0).item() == doctest::Approx(0.0));
  auto wrong = Tensor::from({1, 3}, {1000.0, 0.0, 0.0});
  CHECK(cross_entropy(wrong, t1).item() == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("pooling routes gradients") {
  auto x = Tensor::from({1, 3, 2}, {1, 5, 7, 2, 3, 4}, true);
  max_pool(x, 1).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{0, 1, 1, 0, 0, 0});
  auto y = Tensor::from({1, 3, 2}, {1, 5, 7, 2, 3, 4}, true);
  mean_pool(y, 1).backward();
  for (double g : y.grad()) CHECK(g == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("backward of add and matmul is linear in the upstream gradient") {
  std::mt19937_64 rng(10);
  auto a = random_tensor({2, 3}, rng), w = random_tensor({3, 2}, rng);
  auto g1 = random_tensor({2, 2}, rng, false), g2 = random_tensor({2, 2}, rng, false);
  auto grad_of = [&](const Tensor& up) {
    a.zero_grad();
    sum(mul(matmul(a, w), up)).backward();
    return std::vector<double>(a.grad().begin(), a.grad().end());
  };
  auto both = grad_of(add(g1, g2));
  auto s1 = grad_of(g1), s2 = grad_of(g2);
  for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx(s1[i] + s2[i]));
}

TEST_CASE("no-grad guard disables recording") {
  auto x = Tensor::from({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    auto y = scale(x, 2);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(scale(x, 2).requires_grad());
}

TEST_CASE("shape errors") {
  auto a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, b), htec::Error);
  CHECK_THROWS_AS(add(a, Tensor::zeros({3, 2})), htec::Error);
  CHECK_THROWS_AS(reshape(a, {5}), htec::Error);
  CHECK_THROWS_AS(slice(a, 1, 2, 2), htec::Error);
  CHECK_THROWS_AS(Tensor::from({2}, {1, 2, 3}), htec::Error);
  CHECK_THROWS_AS(Tensor::zeros({2}).item(), htec::Error);
  const std::vector<std::int32_t> bad{9};
  CHECK_THROWS_AS(embedding_lookup(a, bad), htec::Error);
}
