#include <doctest.h>

#include <cmath>
#include <random>

#include "s2v/adam.hpp"
#include "s2v/autodiff.hpp"
#include "s2v/conv.hpp"
#include "s2v/error.hpp"
#include "s2v/ops.hpp"
#include "support/oracles.hpp"

using namespace s2v;
using s2v::testing::central_difference;
using s2v::testing::random_tensor;
using s2v::testing::relative_error;

namespace {

FeatureMap<double> fm(std::size_t c, std::vector<double> v) {
  const std::size_t l = v.size() / c;
  return feature_map<double>(c, l, std::move(v));
}

Tensor<double> kernel(std::size_t a, std::size_t b, std::vector<double> v) {
  const std::size_t k = v.size() / (a * b);
  return Tensor<double>({a, b, k}, std::move(v));
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.channels() == 2);
  CHECK(t.length() == 3);
  t.at(1, 2) = 4.0f;
  CHECK(t[5] == 4.0f);
  CHECK(t.row(1)[2] == 4.0f);
  t.reshape({3, 2});
  CHECK(t.shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshape({4, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK(to_string(Shape{2, 3}) == "[2x3]");
}

TEST_CASE("output length rules") {
  CHECK(conv_output_length(16, 7, 2, 3) == 8);
  CHECK(conv_output_length(3, 2, 1, 0) == 2);
  CHECK_THROWS_AS(conv_output_length(2, 5, 1, 0), ShapeError);
  CHECK(transposed_output_length(8, 4, 2, 1) == 16);
  CHECK_THROWS_AS(transposed_output_length(1, 2, 1, 1), ShapeError);
}

TEST_CASE("conv1d worked examples") {
  const std::vector<double> zero{0.0};
  auto y = conv1d(fm(1, {1, 2, 3}), kernel(1, 1, {1, 0}), std::span<const double>(zero), 1, 0);
  CHECK(y.storage() == std::vector<double>{1, 2});

  y = conv1d(fm(1, {1, 1, 1, 1}), kernel(1, 1, {1, 1}), std::span<const double>(zero), 2, 0);
  CHECK(y.storage() == std::vector<double>{2, 2});

  const std::vector<double> three{3.0};
  y = conv1d(fm(1, {5}), kernel(1, 1, {0}), std::span<const double>(three), 1, 0);
  CHECK(y.storage() == std::vector<double>{3});
}

TEST_CASE("conv1d rejects mismatched channels with both shapes in the message") {
  const std::vector<double> b{0.0};
  try {
    (void)conv1d(fm(2, {1, 2, 3, 4}), kernel(1, 3, {1, 1, 1}), std::span<const double>(b), 1, 0);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[1x3x1]") != std::string::npos);
  }
}

TEST_CASE("transposed_conv1d worked examples") {
  const std::vector<double> zero{0.0};
  auto y = transposed_conv1d(fm(1, {1, 1}), kernel(1, 1, {1, 1}), std::span<const double>(zero), 2, 0);
  CHECK(y.storage() == std::vector<double>{1, 1, 1, 1});

  const std::vector<double> bias{0.25, -0.5};
  y = transposed_conv1d(fm(1, {0, 0, 0}), Tensor<double>({1, 2, 3}, 0.7), std::span<const double>(bias), 2, 1);
  REQUIRE(y.channels() == 2);
  for (std::size_t n = 0; n < y.length(); ++n) {
    CHECK(y.at(0, n) == 0.25);
    CHECK(y.at(1, n) == -0.5);
  }
}

TEST_CASE("adjoint identity <conv(x), y> == <x, tconv(y)> on randomized shapes") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> kd(1, 9), sd(0, 2), pd(0, 3), cd(1, 3), ld(1, 20);
  const std::size_t strides[] = {1, 2, 4};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = kd(rng), s = strides[sd(rng)], p = pd(rng), cin = cd(rng), cout = cd(rng);
    const std::size_t lc = ld(rng);
    // L chosen so the transposed map of an lc-long signal returns exactly L samples.
    const long long l = static_cast<long long>((lc - 1) * s + k) - 2 * static_cast<long long>(p);
    if (l <= 0 || static_cast<std::size_t>(l) + 2 * p < k) continue;
    REQUIRE(conv_output_length(static_cast<std::size_t>(l), k, s, p) == lc);
    auto x = random_tensor({cin, static_cast<std::size_t>(l)}, rng);
    auto w = random_tensor({cout, cin, k}, rng);
    auto y = random_tensor({cout, lc}, rng);
    // The transposed weight layout is [in][out][K] with in = cout here.
    Tensor<double> wt({cout, cin, k});
    for (std::size_t a = 0; a < cout; ++a)
      for (std::size_t b = 0; b < cin; ++b)
        for (std::size_t r = 0; r < k; ++r) wt[(a * cin + b) * k + r] = w[(a * cin + b) * k + r];
    const std::vector<double> zo(cout, 0.0), zi(cin, 0.0);
    const auto cx = conv1d(x, w, std::span<const double>(zo), s, p);
    const auto ty = transposed_conv1d(y, wt, std::span<const double>(zi), s, p);
    REQUIRE(ty.shape() == x.shape());
    const double lhs = s2v::testing::inner(cx, y), rhs = s2v::testing::inner(x, ty);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(5);
  const std::size_t c = 2, l = 13, k = 5, s = 2, p = 2;
  const std::size_t cols = conv_output_length(l, k, s, p);
  auto x = random_tensor({c, l}, rng);
  auto y = random_tensor({c * k, cols}, rng);
  Tensor<double> ax({c * k, cols}), aty({c, l});
  im2col<double>(x.values(), c, l, k, s, p, cols, ax.values());
  col2im<double>(y.values(), c, l, k, s, p, cols, aty.values());
  CHECK(std::abs(s2v::testing::inner(ax, y) - s2v::testing::inner(x, aty)) < 1e-12);
}

TEST_CASE("elementwise power and tanh") {
  CHECK(elementwise_power(fm(1, {-0.5, 0.5}), 2).storage() == std::vector<double>{0.25, 0.25});
  CHECK(elementwise_power(fm(1, {0.3, -0.7}), 1).storage() == std::vector<double>{0.3, -0.7});
  CHECK(elementwise_power(fm(1, {0.9}), 3)[0] == doctest::Approx(0.729).epsilon(1e-15));
  CHECK_THROWS_AS(elementwise_power(fm(1, {1.0}), 0), UsageError);

  CHECK(tanh_activation(fm(1, {0.0}))[0] == 0.0);
  CHECK(std::abs(tanh_activation(fm(1, {20.0}))[0] - 1.0) < 1e-9);
  std::mt19937_64 rng(2);
  auto x = random_tensor({1, 64}, rng, -5, 5);
  auto neg = x;
  for (auto& v : neg.values()) v = -v;
  const auto a = tanh_activation(x), b = tanh_activation(neg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == -b[i]);
    CHECK(std::abs(a[i]) <= 1.0);
  }
  // Powers of values in [-1, 1] stay in [-1, 1].
  auto u = random_tensor({1, 64}, rng);
  for (int q = 1; q <= 5; ++q) {
    const auto powered = elementwise_power(u, q);
    for (double v : powered.values()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("tape: hand-derived gradients") {
  Tape<double> tape;
  Tensor<double> w({1, 1, 1}, 1.0);
  Tensor<double> b({1}, 0.0);
  const Var x = tape.constant(fm(1, {1, 2}));
  const Var vw = tape.parameter(w, true);
  const Var vb = tape.parameter(b, true);
  const Var loss = ops::sum(tape, ops::conv1d(tape, x, vw, vb, 1, 0));
  tape.backward(loss);
  CHECK(tape.grad(vw)[0] == 3.0);
  CHECK(tape.grad(vb)[0] == 2.0);

  Tape<double> t2;
  const Var z = t2.variable(Tensor<double>({1}, 0.0));
  const Var y = ops::tanh(t2, z);
  t2.backward(y);
  CHECK(t2.grad(z)[0] == 1.0);
}

TEST_CASE("tape usage errors") {
  Tape<double> empty;
  CHECK_THROWS_AS(empty.backward(Var{0}), UsageError);

  Tape<double> tape;
  const Var x = tape.variable(Tensor<double>({2}, 1.0));
  CHECK_THROWS_AS(tape.grad(x), UsageError);
  CHECK_THROWS_AS(tape.backward(x), UsageError);  // not a scalar
  const Var c = tape.constant(Tensor<double>({1}, 2.0));
  const Var s = ops::sum(tape, x);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), UsageError);
  CHECK_THROWS_AS(tape.grad(c), UsageError);
  CHECK_THROWS_AS(tape.value(Var{99}), UsageError);
  CHECK_THROWS_AS(ops::sum(tape, x), UsageError);
}

TEST_CASE("frozen parameters receive no gradient work") {
  Tape<double> tape;
  Tensor<double> w({1, 1, 2}, 0.5), b({1}, 0.0);
  const Var x = tape.variable(fm(1, {1, 2, 3}));
  const Var vw = tape.parameter(w, false);
  const Var vb = tape.parameter(b, false);
  const Var loss = ops::sum(tape, ops::conv1d(tape, x, vw, vb, 1, 0));
  CHECK_FALSE(tape.requires_grad(vw));
  CHECK(tape.requires_grad(loss));
  tape.backward(loss);
  CHECK(tape.grad(x).storage() == std::vector<double>{0.5, 1.0, 0.5});
  CHECK_THROWS_AS(tape.grad(vw), UsageError);
}

namespace {

using Builder = std::function<Var(Tape<double>&, std::vector<Var>&)>;

/// Max relative error between tape gradients and central differences over `points` random
/// coordinates of the given leaves.
double gradient_check(std::vector<Tensor<double>>& leaves, const Builder& build, int points,
                      std::mt19937_64& rng) {
  auto loss = [&] {
    Tape<double> t;
    std::vector<Var> vars;
    for (auto& l : leaves) vars.push_back(t.parameter(l, true));
    return t.value(build(t, vars))[0];
  };
  Tape<double> tape;
  std::vector<Var> vars;
  for (auto& l : leaves) vars.push_back(tape.parameter(l, true));
  tape.backward(build(tape, vars));
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const std::size_t which = rng() % leaves.size();
    const std::size_t at = rng() % leaves[which].size();
    const double numeric = central_difference(loss, leaves[which], at);
    worst = std::max(worst, relative_error(tape.grad(vars[which])[at], numeric));
  }
  return worst;
}

}  // namespace

TEST_CASE("finite-difference gradients of the primitive ops") {
  std::mt19937_64 rng(42);
  SUBCASE("conv1d with stride and padding") {
    std::vector<Tensor<double>> leaves{random_tensor({2, 11}, rng), random_tensor({3, 2, 4}, rng),
                                       random_tensor({3}, rng)};
    CHECK(gradient_check(leaves, [](Tape<double>& t, std::vector<Var>& v) {
      return ops::mean_squared_diff(t, ops::conv1d(t, v[0], v[1], v[2], 2, 1),
                                    t.constant(Tensor<double>({3, 5}, 0.3)));
    }, 100, rng) < 1e-4);
  }
  SUBCASE("transposed conv1d") {
    std::vector<Tensor<double>> leaves{random_tensor({2, 6}, rng), random_tensor({2, 3, 4}, rng),
                                       random_tensor({3}, rng)};
    CHECK(gradient_check(leaves, [](Tape<double>& t, std::vector<Var>& v) {
      return ops::mean_squared_diff(t, ops::transposed_conv1d(t, v[0], v[1], v[2], 2, 1),
                                    t.constant(Tensor<double>({3, 12}, -0.2)));
    }, 100, rng) < 1e-4);
  }
  SUBCASE("power, tanh, add, scale, concat, flatten, dense") {
    std::vector<Tensor<double>> leaves{random_tensor({2, 5}, rng), random_tensor({2, 5}, rng),
                                       random_tensor({3, 20}, rng), random_tensor({3}, rng)};
    CHECK(gradient_check(leaves, [](Tape<double>& t, std::vector<Var>& v) {
      const Var a = ops::power(t, v[0], 3);
      const Var b = ops::scale(t, ops::tanh(t, v[1]), 1.7);
      const Var c = ops::concat_channels(t, ops::add(t, a, b), v[1]);
      const Var d = ops::dense(t, ops::flatten(t, c), v[2], v[3]);
      return ops::mean_squared_diff(t, ops::tanh(t, d), t.constant(Tensor<double>({3}, 0.1)));
    }, 100, rng) < 1e-4);
  }
  SUBCASE("mean absolute difference away from kinks") {
    std::vector<Tensor<double>> leaves{random_tensor({1, 16}, rng, 0.5, 1.0),
                                       random_tensor({1, 16}, rng, -1.0, -0.5)};
    CHECK(gradient_check(leaves, [](Tape<double>& t, std::vector<Var>& v) {
      return ops::mean_abs_diff(t, v[0], v[1]);
    }, 100, rng) < 1e-4);
  }
}

TEST_CASE("shape errors from ops") {
  Tape<double> tape;
  const Var a = tape.variable(Tensor<double>({2, 4}));
  const Var b = tape.variable(Tensor<double>({2, 5}));
  CHECK_THROWS_AS(ops::add(tape, a, b), ShapeError);
  CHECK_THROWS_AS(ops::concat_channels(tape, a, b), ShapeError);
  CHECK_THROWS_AS(ops::mean_abs_diff(tape, a, b), ShapeError);
}

TEST_CASE("adam step") {
  SUBCASE("first step moves by about the learning rate against the gradient") {
    Tensor<double> p({1}, 0.0);
    std::vector<Tensor<double>*> params{&p};
    std::vector<Tensor<double>> grads{Tensor<double>({1}, 1.0)};
    AdamState<double> state;
    adam_step<double>(params, grads, state, 0.1);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(state.t == 1);
    adam_step<double>(params, grads, state, 0.1);
    CHECK(state.t == 2);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor<double> p({3}, 0.5);
    std::vector<Tensor<double>*> params{&p};
    std::vector<Tensor<double>> grads{Tensor<double>({3}, 0.0)};
    AdamState<double> state;
    adam_step<double>(params, grads, state, 0.1);
    for (double v : p.values()) CHECK(v == 0.5);
  }
  SUBCASE("equal gradients move parameters identically") {
    Tensor<double> a({2}, 0.3), b({2}, 0.3);
    std::vector<Tensor<double>*> params{&a, &b};
    std::vector<Tensor<double>> grads{Tensor<double>({2}, -0.7), Tensor<double>({2}, -0.7)};
    AdamState<double> state;
    for (int i = 0; i < 5; ++i) adam_step<double>(params, grads, state, 0.01);
    CHECK(a == b);
    for (const auto& v : state.v)
      for (double e : v.values()) CHECK(e >= 0.0);
  }
  SUBCASE("shape mismatch") {
    Tensor<double> p({2}, 0.0);
    std::vector<Tensor<double>*> params{&p};
    std::vector<Tensor<double>> grads{Tensor<double>({3}, 1.0)};
    AdamState<double> state;
    CHECK_THROWS_AS(adam_step<double>(params, grads, state, 0.1), ShapeError);
  }
}
