#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "sngan/ops.hpp"
#include "sngan/spectral_norm.hpp"

using namespace sngan;
using namespace sngan::nn;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

}  // namespace

TEST_SUITE("spectral_norm") {
  TEST_CASE("converged power iteration recovers the top singular value") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t rows = 1 + rng.below(40), cols = 1 + rng.below(40);
      const Tensor w = random_matrix(rows, cols, rng);
      auto state = sn::make_state(w, rng);
      const double sigma = sn::power_iterate_converged(w, state);
      CHECK(sigma == doctest::Approx(oracle::sigma_max(w)).epsilon(1e-5));
    }
  }

  TEST_CASE("normalized weights have unit spectral norm") {
    Rng rng(2);
    const Tensor w = random_matrix(16, 24, rng);
    auto state = sn::make_state(w, rng);
    const Tensor wn = sn::normalize_converged(w, state);
    CHECK(oracle::sigma_max(wn) == doctest::Approx(1.0).epsilon(1e-4));
  }

  TEST_CASE("the estimate never exceeds the true value and approaches it") {
    Rng rng(3);
    const Tensor w = random_matrix(12, 9, rng);
    const double truth = oracle::sigma_max(w);
    auto state = sn::make_state(w, rng);
    double previous = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double s = sn::power_iterate(w, state, 1);
      CHECK(s <= truth * (1 + 1e-6));
      CHECK(s >= previous - 1e-6);
      previous = s;
    }
    CHECK(previous == doctest::Approx(truth).epsilon(1e-3));
    CHECK(state.iterations == 50);
  }

  TEST_CASE("conv kernels reshape to [out, in * k * k]") {
    const Tensor k({8, 3, 4, 4}, 1.0f);
    CHECK(sn::reshape_weight(k).shape() == Shape{8, 48});
    CHECK_THROWS_AS(sn::reshape_weight(Tensor({2, 2, 2})), ShapeError);
  }

  TEST_CASE("a zero weight passes through with a warning") {
    std::vector<std::string> warnings;
    sn::set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
    Rng rng(4);
    Tensor w({3, 3}, 0.0f);
    auto state = sn::make_state(Tensor({3, 3}, 1.0f), rng);
    const Tensor out = sn::normalize(w, state, 1);
    sn::set_warning_handler({});
    CHECK(out == w);
    CHECK(warnings.size() == 1);
  }

  TEST_CASE("state mismatches are reported") {
    Rng rng(5);
    auto state = sn::make_state(Tensor({3, 4}, 1.0f), rng);
    CHECK_THROWS_AS(sn::power_iterate(Tensor({4, 4}, 1.0f), state, 1), ShapeError);
    CHECK_THROWS_AS(sn::power_iterate(Tensor({3, 4}, 1.0f), state, 0), std::invalid_argument);
  }

  TEST_CASE("only advancing forward passes update the stored vectors") {
    Rng rng(6);
    Var w(random_matrix(5, 7, rng), true);
    auto state = sn::make_state(w.value(), rng);
    const auto before = state;
    sn::normalized_weight(w, state, false);
    CHECK(state.u == before.u);
    CHECK(state.iterations == 0);
    sn::normalized_weight(w, state, true);
    CHECK(state.u != before.u);
    CHECK(state.iterations == 1);
  }

  TEST_CASE("gradient through W / sigma(W) matches finite differences with fixed vectors") {
    Rng rng(7);
    Var w(random_matrix(4, 6, rng), true);
    auto state = sn::make_state(w.value(), rng);
    sn::power_iterate(w.value(), state, 3);
    Tensor c({4, 6});
    for (auto& v : c.data()) v = static_cast<float>(rng.normal());
    auto f = [&] { return sum_all(mul_const(sn::normalized_weight(w, state, false), c)); };
    CHECK(oracle::gradient_error(f, {w}) < 1e-3);
  }
}
