#include "sngan/adam.hpp"

#include <cmath>

namespace sngan::nn {

void AdamParams::validate() const {
  if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be a finite value >= 0");
  if (!(beta1 >= 0.0f && beta1 < 1.0f)) throw std::invalid_argument("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0f && beta2 < 1.0f)) throw std::invalid_argument("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0f)) throw std::invalid_argument("epsilon must be > 0");
}

void adam_step(AdamState& state, const std::vector<Parameter>& params, const GradientMap& grads) {
  state.params.validate();
  for (const auto& p : params) {
    auto it = grads.find(p.name);
    if (it == grads.end()) continue;
    if (it->second.shape() != p.var.shape())
      throw ShapeError("gradient for " + p.name + " has shape " + to_string(it->second.shape()) +
                       ", parameter has " + to_string(p.var.shape()));
    if (!it->second.all_finite()) throw NonFiniteGradient(p.name);
  }

  ++state.step;
  const auto& hp = state.params;
  const double t = static_cast<double>(state.step);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(hp.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(hp.beta2), t));

  for (const auto& p : params) {
    auto it = grads.find(p.name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    auto [m_it, m_new] = state.first_moment.try_emplace(p.name, g.shape(), 0.0f);
    auto [v_it, v_new] = state.second_moment.try_emplace(p.name, g.shape(), 0.0f);
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (m.shape() != g.shape() || v.shape() != g.shape())
      throw ShapeError("optimizer moments for " + p.name + " do not match the parameter shape");
    Tensor& w = const_cast<Var&>(p.var).leaf_value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0f - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0f - hp.beta2) * g[i] * g[i];
      const float mhat = m[i] / c1;
      const float vhat = v[i] / c2;
      w[i] -= hp.learning_rate * mhat / (std::sqrt(vhat) + hp.epsilon);
    }
  }
}

}  // namespace sngan::nn
