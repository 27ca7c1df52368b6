#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sngan/autograd.hpp"
#include "sngan/rng.hpp"

namespace sngan::sn {

/// Persistent power-iteration state of one normalized layer. `u` spans the
/// rows of the reshaped weight, `v` its columns. Kept in 64-bit: it is an
/// estimator state, not a network value.
struct SpectralState {
  std::vector<double> u;
  std::vector<double> v;
  std::size_t iterations = 0;
};

/// Fresh state for a weight: random unit u, v = normalize(Wᵀu).
SpectralState make_state(const nn::Tensor& weight, Rng& rng);

/// Dense [out, in] passes through; conv [out, in, kh, kw] -> [out, in·kh·kw].
nn::Tensor reshape_weight(const nn::Tensor& weight);

/// `steps` rounds of v ← normalize(Wᵀu), u ← normalize(Wv); returns σ = uᵀWv.
/// A zero matrix yields σ = 0 and leaves the vectors untouched.
double power_iterate(const nn::Tensor& matrix, SpectralState& state, std::size_t steps);

struct Convergence {
  /// Relative singular-pair residual ‖Wᵀu − σv‖ / σ.
  double tolerance = 1e-6;
  std::size_t max_steps = 5000;
};

/// Iterates until the residual criterion holds or max_steps is reached.
double power_iterate_converged(const nn::Tensor& matrix, SpectralState& state,
                               Convergence options = {});

/// σ = uᵀWv with the stored vectors, no update.
double estimate(const nn::Tensor& matrix, const SpectralState& state);

/// W / σ(W) after `steps` power iterations. Returns W unchanged (and emits a
/// warning) when σ = 0.
nn::Tensor normalize(const nn::Tensor& weight, SpectralState& state, std::size_t steps);
nn::Tensor normalize_converged(const nn::Tensor& weight, SpectralState& state,
                               Convergence options = {});

/// Differentiable W / σ(W) for the forward pass. With `advance` one power
/// iteration runs first. σ = uᵀWv is differentiated as a function of W with
/// u, v held constant.
nn::Var normalized_weight(const nn::Var& weight, SpectralState& state, bool advance);

using WarningHandler = std::function<void(const std::string&)>;
/// Receives degenerate-weight events. Default writes to stderr.
void set_warning_handler(WarningHandler handler);

}  // namespace sngan::sn
