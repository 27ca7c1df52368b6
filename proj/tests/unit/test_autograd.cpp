#include <thread>

#include "doctest.h"
#include "sngan/ops.hpp"

using namespace sngan::nn;

TEST_SUITE("autograd") {
  TEST_CASE("first and second derivatives of a cubic") {
    Var x(Tensor::scalar(1.5f), true);
    const Var y = mul(square(x), x);
    const Var dy = grad(y, {x}, {.create_graph = true})[0];
    CHECK(dy.value().item() == doctest::Approx(3 * 1.5 * 1.5));
    const Var d2y = grad(dy, {x})[0];
    CHECK(d2y.value().item() == doctest::Approx(6 * 1.5));
  }

  TEST_CASE("a shared subexpression accumulates gradient from every use") {
    Var x(Tensor::scalar(2.0f), true);
    const Var h = scale(x, 3.0f);
    const Var y = add(mul(h, h), h);
    CHECK(grad(y, {x})[0].value().item() == doctest::Approx(3 * (2 * 6 + 1)));
  }

  TEST_CASE("a released record cannot be differentiated again") {
    Var x(Tensor::scalar(2.0f), true);
    const Var y = square(add_scalar(x, 1.0f));
    grad(y, {x});
    CHECK_THROWS_AS(grad(y, {x}), GraphConsumedError);
  }

  TEST_CASE("retain_graph allows repeated passes with equal results") {
    Var x(Tensor::scalar(2.0f), true);
    const Var y = square(add_scalar(x, 1.0f));
    const float a = grad(y, {x}, {.retain_graph = true})[0].value().item();
    const float b = grad(y, {x})[0].value().item();
    CHECK(a == b);
  }

  TEST_CASE("inputs that do not reach the output get zero gradients") {
    Var x(Tensor({2}, 1.0f), true), unused(Tensor({3}, 1.0f), true);
    const auto g = grad(sum_all(x), {x, unused});
    CHECK(g[1].value() == Tensor({3}, 0.0f));
  }

  TEST_CASE("implicit gradient needs a single-element output") {
    Var x(Tensor({2}, 1.0f), true);
    CHECK_THROWS_AS(grad(square(x), {x}), ShapeError);
    const auto g = grad(square(x), {x}, {}, Var(Tensor({2}, 1.0f)));
    CHECK(g[0].value()[0] == doctest::Approx(2.0));
  }

  TEST_CASE("no-grad mode records nothing and is per thread") {
    Var x(Tensor::scalar(1.0f), true);
    {
      NoGradGuard guard;
      CHECK_FALSE(square(x).requires_grad());
      bool other_thread = false;
      std::thread([&] { other_thread = square(x).requires_grad(); }).join();
      CHECK(other_thread);
    }
    CHECK(square(x).requires_grad());
  }

  TEST_CASE("detach blocks gradient flow") {
    Var x(Tensor::scalar(3.0f), true);
    const Var y = mul(x, detach(x));
    CHECK(grad(y, {x})[0].value().item() == doctest::Approx(3.0));
  }

  TEST_CASE("leaf_value is only available on leaves") {
    Var x(Tensor::scalar(3.0f), true);
    Var y = square(x);
    CHECK_NOTHROW(x.leaf_value());
    CHECK_THROWS_AS(y.leaf_value(), std::logic_error);
  }
}
