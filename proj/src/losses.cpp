#include "sngan/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "sngan/ops.hpp"

namespace sngan::loss {

using namespace sngan::nn;

void LossConfig::validate() const {
  if (!(lambda_gp >= 0.0f)) throw std::invalid_argument("lambda_gp: must be >= 0");
  if (lambda_gp > 0.0f && objective != Objective::wasserstein)
    throw std::invalid_argument("lambda_gp: a positive penalty requires the wasserstein objective");
  if (!(label_smooth_alpha > 0.0f && label_smooth_alpha <= 1.0f))
    throw std::invalid_argument("label_smooth_alpha: must lie in (0, 1]");
  if (!(input_noise_variance >= 0.0f)) throw std::invalid_argument("input_noise_variance: must be >= 0");
}

namespace {

void check_alpha(float alpha) {
  if (!(alpha > 0.0f && alpha <= 1.0f)) throw std::invalid_argument("alpha must lie in (0, 1]");
}

Var clamped(const Var& p) { return clamp(p, kProbabilityClamp, 1.0f - kProbabilityClamp); }

// log(1 − p)
Var log_complement(const Var& p) { return log(add_scalar(neg(p), 1.0f)); }

}  // namespace

Var standard_d_loss(const Var& d_real, const Var& d_fake, float alpha) {
  check_alpha(alpha);
  const Var r = clamped(d_real), f = clamped(d_fake);
  Var real_term = scale(log(r), alpha);
  if (alpha < 1.0f) real_term = add(real_term, scale(log_complement(r), 1.0f - alpha));
  return neg(add(mean_all(real_term), mean_all(log_complement(f))));
}

Var standard_g_loss(const Var& d_fake) { return neg(mean_all(log(clamped(d_fake)))); }

Var standard_d_loss_logits(const Var& real_logits, const Var& fake_logits, float alpha) {
  check_alpha(alpha);
  Var real_term = scale(softplus(neg(real_logits)), alpha);
  if (alpha < 1.0f) real_term = add(real_term, scale(softplus(real_logits), 1.0f - alpha));
  return add(mean_all(real_term), mean_all(softplus(fake_logits)));
}

Var standard_g_loss_logits(const Var& fake_logits) { return mean_all(softplus(neg(fake_logits))); }

WassersteinLosses wasserstein_losses(const Var& f_real, const Var& f_fake) {
  const Var fake_mean = mean_all(f_fake);
  return {sub(fake_mean, mean_all(f_real)), neg(fake_mean)};
}

Var gradient_penalty(const Critic& critic, const Tensor& x_real, const Tensor& x_fake,
                     float lambda, Rng& rng) {
  if (x_real.shape() != x_fake.shape())
    throw ShapeError("gradient_penalty: real " + to_string(x_real.shape()) + " and fake " +
                     to_string(x_fake.shape()) + " differ");
  if (!(lambda >= 0.0f)) throw std::invalid_argument("gradient_penalty: lambda must be >= 0");
  const std::size_t batch = x_real.dim(0), per = x_real.sample_size();
  Tensor mixed(x_real.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const float eps = static_cast<float>(rng.uniform());
    for (std::size_t i = b * per; i < (b + 1) * per; ++i)
      mixed[i] = eps * x_real[i] + (1.0f - eps) * x_fake[i];
  }
  const Var x(std::move(mixed), true);
  const Var out = critic(x);
  if (out.shape() != Shape{batch, 1})
    throw ShapeError("gradient_penalty: critic must return [B, 1], got " + to_string(out.shape()));
  const Var g = grad(sum_all(out), {x}, {.create_graph = true})[0];
  const Var norm = sqrt(add_scalar(sum_per_sample(square(g)), 1e-12f));
  return scale(mean_all(square(add_scalar(norm, -1.0f))), lambda);
}

Tensor inject_input_noise(const Tensor& x, float variance, Rng& rng) {
  if (!(variance >= 0.0f)) throw std::invalid_argument("noise variance must be >= 0");
  Tensor out = x;
  if (variance == 0.0f) return out;
  const double sd = std::sqrt(static_cast<double>(variance));
  for (auto& v : out.data()) v += static_cast<float>(rng.normal() * sd);
  return out;
}

}  // namespace sngan::loss
