#pragma once

#include "sngan/autograd.hpp"

// Differentiable tensor operations. Every backward rule is expressed with the
// ops in this header, so gradients can themselves be differentiated.
namespace sngan::nn {

// Elementwise, same shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, float factor);
Var add_scalar(const Var& a, float value);

/// a ⊙ c for a constant tensor c.
Var mul_const(const Var& a, const Tensor& c);
/// a + c for a constant tensor c.
Var add_const(const Var& a, const Tensor& c);

Var square(const Var& a);
Var sqrt(const Var& a);
Var log(const Var& a);
Var reciprocal(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
/// log(1 + exp(a)), computed stably.
Var softplus(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, float slope);
/// Clamp with zero gradient outside [lo, hi].
Var clamp(const Var& a, float lo, float hi);

// Reductions and broadcasts.
Var sum_all(const Var& a);  // -> [1]
Var mean_all(const Var& a);
Var broadcast_scalar(const Var& s, const Shape& shape);
/// [B, ...] -> [B]
Var sum_per_sample(const Var& a);
/// [B] -> shape with leading axis B
Var broadcast_per_sample(const Var& v, const Shape& shape);
/// [C] -> shape [B, C, ...]
Var broadcast_channel(const Var& v, const Shape& shape);
/// [B, C, ...] -> [C]
Var sum_to_channel(const Var& a);
/// [B, Y] -> [B, Y, H, W]
Var broadcast_spatial(const Var& a, std::size_t height, std::size_t width);
/// [B, Y, H, W] -> [B, Y]
Var sum_spatial(const Var& a);

Var reshape(const Var& a, const Shape& shape);
/// Concatenate along axis 1; all other axes must agree.
Var concat_channels(const Var& a, const Var& b);
/// Slice [start, start + length) of axis 1.
Var narrow_channels(const Var& a, std::size_t start, std::size_t length);
/// Embed `a` at offset `start` of axis 1 in a zero tensor with `total` channels.
Var pad_channels(const Var& a, std::size_t total, std::size_t start);

/// op(a) · op(b) for 2-D operands; `ta`/`tb` transpose the operand.
Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false);

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// x [B, C, H, W] * w [O, C, K, K] -> [B, O, Ho, Wo]
Var conv2d(const Var& x, const Var& w, ConvGeometry g);
/// Adjoint of conv2d in its input: y [B, O, Ho, Wo], w [O, C, K, K] -> [B, C, H, W].
Var conv_transpose2d(const Var& y, const Var& w, ConvGeometry g, std::size_t height,
                     std::size_t width);
/// Gradient of conv2d in its weight: x [B, C, H, W], y [B, O, Ho, Wo] -> [O, C, K, K].
Var conv2d_weight_grad(const Var& x, const Var& y, ConvGeometry g, std::size_t kernel);

std::size_t conv_output_size(std::size_t input, std::size_t kernel, ConvGeometry g);

/// Stops gradient flow: same value, no record.
Var detach(const Var& a);

}  // namespace sngan::nn
