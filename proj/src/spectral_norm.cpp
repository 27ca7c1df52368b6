#include "sngan/spectral_norm.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

#include "sngan/ops.hpp"

namespace sngan::sn {

using nn::Shape;
using nn::ShapeError;
using nn::Tensor;
using nn::Var;
using nn::to_string;

namespace {

std::mutex g_handler_mutex;
WarningHandler g_handler = [](const std::string& msg) {
  std::cerr << "warning: " << msg << '\n';
};

void warn(const std::string& msg) {
  std::lock_guard lock(g_handler_mutex);
  if (g_handler) g_handler(msg);
}

struct MatrixView {
  const float* data;
  std::size_t rows, cols;
};

MatrixView as_matrix(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("power iteration expects a matrix, got " + to_string(m.shape()));
  return {m.raw(), m.dim(0), m.dim(1)};
}

double norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// out = Wᵀ u
void mul_transposed(const MatrixView& w, const std::vector<double>& u, std::vector<double>& out) {
  out.assign(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const float* row = w.data + r * w.cols;
    const double ur = u[r];
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += row[c] * ur;
  }
}

// out = W v
void mul(const MatrixView& w, const std::vector<double>& v, std::vector<double>& out) {
  out.assign(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const float* row = w.data + r * w.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * v[c];
    out[r] = s;
  }
}

double bilinear(const MatrixView& w, const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t r = 0; r < w.rows; ++r) {
    const float* row = w.data + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * v[c];
    s += u[r] * acc;
  }
  return s;
}

void check_state(const MatrixView& w, const SpectralState& state) {
  if (state.u.size() != w.rows || state.v.size() != w.cols)
    throw ShapeError("spectral state (" + std::to_string(state.u.size()) + ", " +
                     std::to_string(state.v.size()) + ") does not match matrix " +
                     std::to_string(w.rows) + "x" + std::to_string(w.cols));
}

// One round; false when the matrix annihilates the current vectors.
bool step(const MatrixView& w, SpectralState& state, std::vector<double>& scratch) {
  mul_transposed(w, state.u, scratch);
  const double nv = norm(scratch);
  if (nv == 0.0) return false;
  for (std::size_t i = 0; i < scratch.size(); ++i) state.v[i] = scratch[i] / nv;
  mul(w, state.v, scratch);
  const double nu = norm(scratch);
  if (nu == 0.0) return false;
  for (std::size_t i = 0; i < scratch.size(); ++i) state.u[i] = scratch[i] / nu;
  ++state.iterations;
  return true;
}

}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_handler_mutex);
  g_handler = std::move(handler);
}

Tensor reshape_weight(const Tensor& weight) {
  const auto& s = weight.shape();
  if (s.size() == 2) return weight;
  if (s.size() == 4) return weight.reshaped({s[0], s[1] * s[2] * s[3]});
  throw ShapeError("spectral normalization expects a dense (rank 2) or conv (rank 4) weight, got " +
                   to_string(s));
}

SpectralState make_state(const Tensor& weight, Rng& rng) {
  const Tensor m = reshape_weight(weight);
  SpectralState state;
  state.u.resize(m.dim(0));
  for (auto& x : state.u) x = rng.normal();
  const double n = norm(state.u);
  for (auto& x : state.u) x /= n;
  state.v.assign(m.dim(1), 0.0);
  std::vector<double> scratch;
  const MatrixView w = as_matrix(m);
  mul_transposed(w, state.u, scratch);
  const double nv = norm(scratch);
  if (nv > 0.0)
    for (std::size_t i = 0; i < scratch.size(); ++i) state.v[i] = scratch[i] / nv;
  return state;
}

double estimate(const Tensor& matrix, const SpectralState& state) {
  const MatrixView w = as_matrix(matrix);
  check_state(w, state);
  return bilinear(w, state.u, state.v);
}

double power_iterate(const Tensor& matrix, SpectralState& state, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("power_iterate: steps must be positive");
  const MatrixView w = as_matrix(matrix);
  check_state(w, state);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < steps; ++i)
    if (!step(w, state, scratch)) return 0.0;
  return bilinear(w, state.u, state.v);
}

double power_iterate_converged(const Tensor& matrix, SpectralState& state, Convergence options) {
  const MatrixView w = as_matrix(matrix);
  check_state(w, state);
  std::vector<double> scratch;
  double sigma = 0.0;
  for (std::size_t i = 0; i < options.max_steps; ++i) {
    if (!step(w, state, scratch)) return 0.0;
    sigma = bilinear(w, state.u, state.v);
    mul_transposed(w, state.u, scratch);
    double r = 0.0;
    for (std::size_t c = 0; c < scratch.size(); ++c) {
      const double d = scratch[c] - sigma * state.v[c];
      r += d * d;
    }
    if (std::sqrt(r) <= options.tolerance * std::abs(sigma)) break;
  }
  return sigma;
}

namespace {
Tensor divide(const Tensor& weight, double sigma) {
  if (sigma == 0.0) {
    warn("spectral normalization skipped: weight has zero spectral norm");
    return weight;
  }
  Tensor out = weight;
  const float inv = static_cast<float>(1.0 / sigma);
  for (auto& x : out.data()) x *= inv;
  return out;
}
}  // namespace

Tensor normalize(const Tensor& weight, SpectralState& state, std::size_t steps) {
  return divide(weight, power_iterate(reshape_weight(weight), state, steps));
}

Tensor normalize_converged(const Tensor& weight, SpectralState& state, Convergence options) {
  return divide(weight, power_iterate_converged(reshape_weight(weight), state, options));
}

Var normalized_weight(const Var& weight, SpectralState& state, bool advance) {
  const Tensor matrix = reshape_weight(weight.value());
  double sigma = advance ? power_iterate(matrix, state, 1) : estimate(matrix, state);
  if (sigma == 0.0) {
    warn("spectral normalization skipped: weight has zero spectral norm");
    return weight;
  }
  // σ(W) = Σ W ⊙ (u vᵀ)
  Tensor outer(weight.shape());
  const std::size_t rows = state.u.size(), cols = state.v.size();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      outer[r * cols + c] = static_cast<float>(state.u[r] * state.v[c]);
  const Var s = nn::sum_all(nn::mul_const(weight, outer));
  return nn::mul(weight, nn::broadcast_scalar(nn::reciprocal(s), weight.shape()));
}

}  // namespace sngan::sn
