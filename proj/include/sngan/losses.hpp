#pragma once

#include <functional>

#include "sngan/autograd.hpp"
#include "sngan/rng.hpp"

namespace sngan::loss {

using nn::Tensor;
using nn::Var;

enum class Objective { standard, wasserstein };

struct LossConfig {
  Objective objective = Objective::standard;
  float lambda_gp = 0.0f;
  float label_smooth_alpha = 1.0f;
  float input_noise_variance = 0.0f;

  void validate() const;
};

/// Probabilities are clamped to [1e-7, 1 − 1e-7] before logs.
inline constexpr float kProbabilityClamp = 1e-7f;

/// Discriminator loss on sigmoid outputs. The real term is the cross-entropy
/// against target `alpha` (alpha = 1 is the plain minimax loss):
///   −mean(α log d_real + (1 − α) log(1 − d_real)) − mean(log(1 − d_fake))
Var standard_d_loss(const Var& d_real, const Var& d_fake, float alpha = 1.0f);
/// Non-saturating generator loss −mean(log d_fake).
Var standard_g_loss(const Var& d_fake);

/// The same two losses evaluated on logits, using log σ(l) = −softplus(−l).
Var standard_d_loss_logits(const Var& real_logits, const Var& fake_logits, float alpha = 1.0f);
Var standard_g_loss_logits(const Var& fake_logits);

struct WassersteinLosses {
  Var d_loss;  // mean(f_fake) − mean(f_real)
  Var g_loss;  // −mean(f_fake)
};
WassersteinLosses wasserstein_losses(const Var& f_real, const Var& f_fake);

/// Maps a [B, ...] input to [B, 1] scores.
using Critic = std::function<Var(const Var&)>;

/// λ · mean((‖∇D(x̂)‖₂ − 1)²) with x̂ = ε x_real + (1 − ε) x_fake, one ε ~ U[0, 1]
/// per sample. The result is differentiable in the critic's parameters.
Var gradient_penalty(const Critic& critic, const Tensor& x_real, const Tensor& x_fake,
                     float lambda, Rng& rng);

/// x + n with n ~ N(0, variance) elementwise.
Tensor inject_input_noise(const Tensor& x, float variance, Rng& rng);

}  // namespace sngan::loss
