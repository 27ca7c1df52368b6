#include "sngan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace sngan::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  const float* src = a.raw();
  float* dst = out.raw();
  for (std::size_t i = 0; i < a.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const float* x = a.raw();
  const float* y = b.raw();
  float* dst = out.raw();
  for (std::size_t i = 0; i < a.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

// [outer, channels, inner] view of a rank >= 2 tensor.
struct ChannelView {
  std::size_t outer, channels, inner;
};

ChannelView channel_view(const Shape& s, const char* op) {
  if (s.size() < 2) throw ShapeError(std::string(op) + ": expected rank >= 2, got " + to_string(s));
  return {s[0], s[1], numel(s) / (s[0] * s[1])};
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_result(zip(a.value(), b.value(), std::plus<>()), "add", {a, b},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{g, g};
                     });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_result(zip(a.value(), b.value(), std::minus<>()), "sub", {a, b},
                     [](const Node&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{g, needs[1] ? neg(g) : Var()};
                     });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_result(zip(a.value(), b.value(), std::multiplies<>()), "mul", {a, b},
                     [](const Node& self, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? mul(g, self.inputs[1]) : Var(),
                                               needs[1] ? mul(g, self.inputs[0]) : Var()};
                     });
}

Var neg(const Var& a) { return scale(a, -1.0f); }

Var scale(const Var& a, float factor) {
  return make_result(map(a.value(), [factor](float x) { return x * factor; }), "scale", {a},
                     [factor](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{scale(g, factor)};
                     });
}

Var add_scalar(const Var& a, float value) {
  return make_result(map(a.value(), [value](float x) { return x + value; }), "add_scalar", {a},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{g};
                     });
}

Var mul_const(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape())
    throw ShapeError("mul_const: shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(c.shape()));
  auto held = std::make_shared<const Tensor>(c);
  return make_result(zip(a.value(), c, std::multiplies<>()), "mul_const", {a},
                     [held](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{mul_const(g, *held)};
                     });
}

Var add_const(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape())
    throw ShapeError("add_const: shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(c.shape()));
  return make_result(zip(a.value(), c, std::plus<>()), "add_const", {a},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{g};
                     });
}

Var square(const Var& a) {
  return make_result(map(a.value(), [](float x) { return x * x; }), "square", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{mul(g, scale(self.inputs[0], 2.0f))};
                     });
}

Var sqrt(const Var& a) {
  return make_result(map(a.value(), [](float x) { return std::sqrt(x); }), "sqrt", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{
                           mul(g, scale(reciprocal(sqrt(self.inputs[0])), 0.5f))};
                     });
}

Var log(const Var& a) {
  return make_result(map(a.value(), [](float x) { return std::log(x); }), "log", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{mul(g, reciprocal(self.inputs[0]))};
                     });
}

Var reciprocal(const Var& a) {
  return make_result(map(a.value(), [](float x) { return 1.0f / x; }), "reciprocal", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{neg(mul(g, square(reciprocal(self.inputs[0]))))};
                     });
}

Var tanh(const Var& a) {
  return make_result(map(a.value(), [](float x) { return std::tanh(x); }), "tanh", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       const Var t = tanh(self.inputs[0]);
                       return std::vector<Var>{mul(g, add_scalar(neg(square(t)), 1.0f))};
                     });
}

namespace {
float sigmoid_value(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}
}  // namespace

Var sigmoid(const Var& a) {
  return make_result(map(a.value(), sigmoid_value), "sigmoid", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       const Var s = sigmoid(self.inputs[0]);
                       return std::vector<Var>{mul(g, mul(s, add_scalar(neg(s), 1.0f)))};
                     });
}

Var softplus(const Var& a) {
  return make_result(
      map(a.value(),
          [](float x) { return std::max(x, 0.0f) + std::log1p(std::exp(-std::abs(x))); }),
      "softplus", {a}, [](const Node& self, const Var& g, const std::vector<bool>&) {
        return std::vector<Var>{mul(g, sigmoid(self.inputs[0]))};
      });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0f); }

Var leaky_relu(const Var& a, float slope) {
  return make_result(map(a.value(), [slope](float x) { return x > 0.0f ? x : slope * x; }),
                     "leaky_relu", {a},
                     [slope](const Node& self, const Var& g, const std::vector<bool>&) {
                       Tensor mask = map(self.inputs[0].value(),
                                         [slope](float x) { return x > 0.0f ? 1.0f : slope; });
                       return std::vector<Var>{mul_const(g, mask)};
                     });
}

Var clamp(const Var& a, float lo, float hi) {
  return make_result(map(a.value(), [lo, hi](float x) { return std::clamp(x, lo, hi); }), "clamp",
                     {a}, [lo, hi](const Node& self, const Var& g, const std::vector<bool>&) {
                       Tensor mask = map(self.inputs[0].value(), [lo, hi](float x) {
                         return (x >= lo && x <= hi) ? 1.0f : 0.0f;
                       });
                       return std::vector<Var>{mul_const(g, mask)};
                     });
}

// ------------------------------------------------------ reductions/broadcasts

Var sum_all(const Var& a) {
  double acc = 0.0;
  for (float x : a.value().data()) acc += x;
  return make_result(Tensor::scalar(static_cast<float>(acc)), "sum_all", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{broadcast_scalar(g, self.inputs[0].shape())};
                     });
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0f / static_cast<float>(a.value().size()));
}

Var broadcast_scalar(const Var& s, const Shape& shape) {
  if (s.value().size() != 1) throw ShapeError("broadcast_scalar: expected a single element");
  return make_result(Tensor(shape, s.value()[0]), "broadcast_scalar", {s},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{sum_all(g)};
                     });
}

Var sum_per_sample(const Var& a) {
  const auto& v = a.value();
  const std::size_t batch = v.dim(0), n = v.sample_size();
  Tensor out({batch});
  for (std::size_t b = 0; b < batch; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[b * n + i];
    out[b] = static_cast<float>(acc);
  }
  return make_result(std::move(out), "sum_per_sample", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{broadcast_per_sample(g, self.inputs[0].shape())};
                     });
}

Var broadcast_per_sample(const Var& v, const Shape& shape) {
  if (v.shape() != Shape{shape.at(0)})
    throw ShapeError("broadcast_per_sample: " + to_string(v.shape()) + " to " + to_string(shape));
  Tensor out(shape);
  const std::size_t n = out.sample_size();
  for (std::size_t b = 0; b < shape[0]; ++b)
    std::fill_n(out.raw() + b * n, n, v.value()[b]);
  return make_result(std::move(out), "broadcast_per_sample", {v},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{sum_per_sample(g)};
                     });
}

Var broadcast_channel(const Var& v, const Shape& shape) {
  const auto cv = channel_view(shape, "broadcast_channel");
  if (v.shape() != Shape{cv.channels})
    throw ShapeError("broadcast_channel: " + to_string(v.shape()) + " to " + to_string(shape));
  Tensor out(shape);
  float* dst = out.raw();
  for (std::size_t o = 0; o < cv.outer; ++o)
    for (std::size_t c = 0; c < cv.channels; ++c, dst += cv.inner)
      std::fill_n(dst, cv.inner, v.value()[c]);
  return make_result(std::move(out), "broadcast_channel", {v},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{sum_to_channel(g)};
                     });
}

Var sum_to_channel(const Var& a) {
  const auto cv = channel_view(a.shape(), "sum_to_channel");
  Tensor out({cv.channels});
  const float* src = a.value().raw();
  for (std::size_t o = 0; o < cv.outer; ++o)
    for (std::size_t c = 0; c < cv.channels; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < cv.inner; ++i) acc += src[i];
      out[c] += static_cast<float>(acc);
      src += cv.inner;
    }
  return make_result(std::move(out), "sum_to_channel", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{broadcast_channel(g, self.inputs[0].shape())};
                     });
}

Var broadcast_spatial(const Var& a, std::size_t height, std::size_t width) {
  if (a.shape().size() != 2) throw ShapeError("broadcast_spatial: expected [B, Y]");
  const std::size_t batch = a.shape()[0], ydim = a.shape()[1], hw = height * width;
  Tensor out({batch, ydim, height, width});
  for (std::size_t i = 0; i < batch * ydim; ++i)
    std::fill_n(out.raw() + i * hw, hw, a.value()[i]);
  return make_result(std::move(out), "broadcast_spatial", {a},
                     [](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{sum_spatial(g)};
                     });
}

Var sum_spatial(const Var& a) {
  if (a.shape().size() != 4) throw ShapeError("sum_spatial: expected [B, Y, H, W]");
  const auto& s = a.shape();
  const std::size_t hw = s[2] * s[3];
  Tensor out({s[0], s[1]});
  for (std::size_t i = 0; i < s[0] * s[1]; ++i) {
    float acc = 0.0f;
    for (std::size_t j = 0; j < hw; ++j) acc += a.value()[i * hw + j];
    out[i] = acc;
  }
  const std::size_t h = s[2], w = s[3];
  return make_result(std::move(out), "sum_spatial", {a},
                     [h, w](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{broadcast_spatial(g, h, w)};
                     });
}

Var reshape(const Var& a, const Shape& shape) {
  return make_result(a.value().reshaped(shape), "reshape", {a},
                     [](const Node& self, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{reshape(g, self.inputs[0].shape())};
                     });
}

Var concat_channels(const Var& a, const Var& b) {
  const auto va = channel_view(a.shape(), "concat_channels");
  const auto vb = channel_view(b.shape(), "concat_channels");
  if (va.outer != vb.outer || va.inner != vb.inner)
    throw ShapeError("concat_channels: incompatible " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  Shape shape = a.shape();
  shape[1] = va.channels + vb.channels;
  Tensor out(shape);
  float* dst = out.raw();
  const std::size_t na = va.channels * va.inner, nb = vb.channels * vb.inner;
  for (std::size_t o = 0; o < va.outer; ++o) {
    dst = std::copy_n(a.value().raw() + o * na, na, dst);
    dst = std::copy_n(b.value().raw() + o * nb, nb, dst);
  }
  const std::size_t ca = va.channels, cb = vb.channels;
  return make_result(std::move(out), "concat_channels", {a, b},
                     [ca, cb](const Node&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? narrow_channels(g, 0, ca) : Var(),
                                               needs[1] ? narrow_channels(g, ca, cb) : Var()};
                     });
}

Var narrow_channels(const Var& a, std::size_t start, std::size_t length) {
  const auto v = channel_view(a.shape(), "narrow_channels");
  if (start + length > v.channels || length == 0)
    throw ShapeError("narrow_channels: range out of bounds for " + to_string(a.shape()));
  Shape shape = a.shape();
  shape[1] = length;
  Tensor out(shape);
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(a.value().raw() + (o * v.channels + start) * v.inner, length * v.inner,
                out.raw() + o * length * v.inner);
  const std::size_t total = v.channels;
  return make_result(std::move(out), "narrow_channels", {a},
                     [total, start](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{pad_channels(g, total, start)};
                     });
}

Var pad_channels(const Var& a, std::size_t total, std::size_t start) {
  const auto v = channel_view(a.shape(), "pad_channels");
  if (start + v.channels > total) throw ShapeError("pad_channels: range out of bounds");
  Shape shape = a.shape();
  shape[1] = total;
  Tensor out(shape);
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(a.value().raw() + o * v.channels * v.inner, v.channels * v.inner,
                out.raw() + (o * total + start) * v.inner);
  const std::size_t length = v.channels;
  return make_result(std::move(out), "pad_channels", {a},
                     [start, length](const Node&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{narrow_channels(g, start, length)};
                     });
}

// -------------------------------------------------------------------- matmul

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  if (a.shape().size() != 2 || b.shape().size() != 2) throw ShapeError("matmul: expected 2-D operands");
  const std::size_t ar = a.shape()[0], ac = a.shape()[1], br = b.shape()[0], bc = b.shape()[1];
  const std::size_t m = ta ? ac : ar, k = ta ? ar : ac, k2 = tb ? bc : br, n = tb ? br : bc;
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  Tensor out({m, n});
  CMapMat A(a.value().raw(), ar, ac), B(b.value().raw(), br, bc);
  MapMat C(out.raw(), m, n);
  if (!ta && !tb)
    C.noalias() = A * B;
  else if (!ta && tb)
    C.noalias() = A * B.transpose();
  else if (ta && !tb)
    C.noalias() = A.transpose() * B;
  else
    C.noalias() = A.transpose() * B.transpose();

  return make_result(std::move(out), "matmul", {a, b},
                     [ta, tb](const Node& self, const Var& g, const std::vector<bool>& needs) {
                       const Var& A = self.inputs[0];
                       const Var& B = self.inputs[1];
                       Var ga, gb;
                       if (needs[0]) ga = ta ? matmul(B, g, tb, true) : matmul(g, B, false, !tb);
                       if (needs[1]) gb = tb ? matmul(g, A, true, ta) : matmul(A, g, !ta, false);
                       return std::vector<Var>{ga, gb};
                     });
}

// ---------------------------------------------------------------------- conv

std::size_t conv_output_size(std::size_t input, std::size_t kernel, ConvGeometry g) {
  if (input + 2 * g.padding < kernel) throw ShapeError("convolution kernel larger than padded input");
  return (input + 2 * g.padding - kernel) / g.stride + 1;
}

namespace {

struct ConvDims {
  std::size_t batch, in_ch, height, width, out_ch, kernel, stride, pad, out_h, out_w;
  std::size_t patch() const { return in_ch * kernel * kernel; }
  std::size_t out_hw() const { return out_h * out_w; }
};

// Batch chunk so the column buffer stays around 4M floats.
std::size_t chunk_size(const ConvDims& d) {
  const std::size_t per = std::max<std::size_t>(1, d.patch() * d.out_hw());
  return std::clamp<std::size_t>((std::size_t{1} << 22) / per, 1, d.batch);
}

// cols[(c*K + kh)*K + kw, b*HoWo + oh*Wo + ow] = x[b0 + b, c, oh*s + kh - p, ow*s + kw - p]
void im2col(const float* x, std::size_t nb, const ConvDims& d, float* cols) {
  const std::size_t cols_n = nb * d.out_hw();
  for (std::size_t c = 0; c < d.in_ch; ++c)
    for (std::size_t kh = 0; kh < d.kernel; ++kh)
      for (std::size_t kw = 0; kw < d.kernel; ++kw) {
        float* row = cols + ((c * d.kernel + kh) * d.kernel + kw) * cols_n;
        for (std::size_t b = 0; b < nb; ++b) {
          const float* plane = x + (b * d.in_ch + c) * d.height * d.width;
          for (std::size_t oh = 0; oh < d.out_h; ++oh) {
            const long ih = static_cast<long>(oh * d.stride + kh) - static_cast<long>(d.pad);
            float* dst = row + b * d.out_hw() + oh * d.out_w;
            if (ih < 0 || ih >= static_cast<long>(d.height)) {
              std::fill_n(dst, d.out_w, 0.0f);
              continue;
            }
            const float* src = plane + ih * d.width;
            for (std::size_t ow = 0; ow < d.out_w; ++ow) {
              const long iw = static_cast<long>(ow * d.stride + kw) - static_cast<long>(d.pad);
              dst[ow] = (iw < 0 || iw >= static_cast<long>(d.width)) ? 0.0f : src[iw];
            }
          }
        }
      }
}

// Adjoint of im2col: accumulates into x (which the caller zeroes).
void col2im(const float* cols, std::size_t nb, const ConvDims& d, float* x) {
  const std::size_t cols_n = nb * d.out_hw();
  for (std::size_t c = 0; c < d.in_ch; ++c)
    for (std::size_t kh = 0; kh < d.kernel; ++kh)
      for (std::size_t kw = 0; kw < d.kernel; ++kw) {
        const float* row = cols + ((c * d.kernel + kh) * d.kernel + kw) * cols_n;
        for (std::size_t b = 0; b < nb; ++b) {
          float* plane = x + (b * d.in_ch + c) * d.height * d.width;
          for (std::size_t oh = 0; oh < d.out_h; ++oh) {
            const long ih = static_cast<long>(oh * d.stride + kh) - static_cast<long>(d.pad);
            if (ih < 0 || ih >= static_cast<long>(d.height)) continue;
            const float* src = row + b * d.out_hw() + oh * d.out_w;
            float* dst = plane + ih * d.width;
            for (std::size_t ow = 0; ow < d.out_w; ++ow) {
              const long iw = static_cast<long>(ow * d.stride + kw) - static_cast<long>(d.pad);
              if (iw >= 0 && iw < static_cast<long>(d.width)) dst[iw] += src[ow];
            }
          }
        }
      }
}

// [nb, O, HoWo] <-> [O, nb*HoWo]
void gather_outputs(const float* y, std::size_t nb, const ConvDims& d, float* mat) {
  const std::size_t hw = d.out_hw();
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      std::copy_n(y + (b * d.out_ch + o) * hw, hw, mat + o * nb * hw + b * hw);
}

void scatter_outputs(const float* mat, std::size_t nb, const ConvDims& d, float* y) {
  const std::size_t hw = d.out_hw();
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      std::copy_n(mat + o * nb * hw + b * hw, hw, y + (b * d.out_ch + o) * hw);
}

Tensor conv_forward(const Tensor& x, const Tensor& w, const ConvDims& d) {
  Tensor y({d.batch, d.out_ch, d.out_h, d.out_w});
  const std::size_t chunk = chunk_size(d);
  std::vector<float> cols(d.patch() * chunk * d.out_hw());
  std::vector<float> out(d.out_ch * chunk * d.out_hw());
  CMapMat W(w.raw(), d.out_ch, d.patch());
  for (std::size_t b0 = 0; b0 < d.batch; b0 += chunk) {
    const std::size_t nb = std::min(chunk, d.batch - b0);
    const std::size_t n = nb * d.out_hw();
    im2col(x.raw() + b0 * d.in_ch * d.height * d.width, nb, d, cols.data());
    MapMat Y(out.data(), d.out_ch, n);
    Y.noalias() = W * CMapMat(cols.data(), d.patch(), n);
    scatter_outputs(out.data(), nb, d, y.raw() + b0 * d.out_ch * d.out_hw());
  }
  return y;
}

Tensor conv_adjoint(const Tensor& y, const Tensor& w, const ConvDims& d) {
  Tensor x({d.batch, d.in_ch, d.height, d.width});
  const std::size_t chunk = chunk_size(d);
  std::vector<float> cols(d.patch() * chunk * d.out_hw());
  std::vector<float> gy(d.out_ch * chunk * d.out_hw());
  CMapMat W(w.raw(), d.out_ch, d.patch());
  for (std::size_t b0 = 0; b0 < d.batch; b0 += chunk) {
    const std::size_t nb = std::min(chunk, d.batch - b0);
    const std::size_t n = nb * d.out_hw();
    gather_outputs(y.raw() + b0 * d.out_ch * d.out_hw(), nb, d, gy.data());
    MapMat C(cols.data(), d.patch(), n);
    C.noalias() = W.transpose() * CMapMat(gy.data(), d.out_ch, n);
    col2im(cols.data(), nb, d, x.raw() + b0 * d.in_ch * d.height * d.width);
  }
  return x;
}

Tensor conv_weight(const Tensor& x, const Tensor& y, const ConvDims& d) {
  Tensor w({d.out_ch, d.in_ch, d.kernel, d.kernel});
  const std::size_t chunk = chunk_size(d);
  std::vector<float> cols(d.patch() * chunk * d.out_hw());
  std::vector<float> gy(d.out_ch * chunk * d.out_hw());
  MapMat W(w.raw(), d.out_ch, d.patch());
  for (std::size_t b0 = 0; b0 < d.batch; b0 += chunk) {
    const std::size_t nb = std::min(chunk, d.batch - b0);
    const std::size_t n = nb * d.out_hw();
    im2col(x.raw() + b0 * d.in_ch * d.height * d.width, nb, d, cols.data());
    gather_outputs(y.raw() + b0 * d.out_ch * d.out_hw(), nb, d, gy.data());
    W.noalias() += CMapMat(gy.data(), d.out_ch, n) * CMapMat(cols.data(), d.patch(), n).transpose();
  }
  return w;
}

void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + ": expected rank 4, got " + to_string(s));
}

}  // namespace

Var conv2d(const Var& x, const Var& w, ConvGeometry g) {
  require_rank4(x.shape(), "conv2d input");
  require_rank4(w.shape(), "conv2d weight");
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (ws[1] != xs[1] || ws[2] != ws[3])
    throw ShapeError("conv2d: weight " + to_string(ws) + " incompatible with input " + to_string(xs));
  ConvDims d{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], g.stride, g.padding,
             conv_output_size(xs[2], ws[2], g), conv_output_size(xs[3], ws[2], g)};
  const std::size_t h = xs[2], wd = xs[3], k = ws[2];
  return make_result(conv_forward(x.value(), w.value(), d), "conv2d", {x, w},
                     [g, h, wd, k](const Node& self, const Var& gy, const std::vector<bool>& needs) {
                       Var gx, gw;
                       if (needs[0]) gx = conv_transpose2d(gy, self.inputs[1], g, h, wd);
                       if (needs[1]) gw = conv2d_weight_grad(self.inputs[0], gy, g, k);
                       return std::vector<Var>{gx, gw};
                     });
}

Var conv_transpose2d(const Var& y, const Var& w, ConvGeometry g, std::size_t height,
                     std::size_t width) {
  require_rank4(y.shape(), "conv_transpose2d input");
  require_rank4(w.shape(), "conv_transpose2d weight");
  const auto& ys = y.shape();
  const auto& ws = w.shape();
  ConvDims d{ys[0], ws[1], height, width, ws[0], ws[2], g.stride, g.padding,
             conv_output_size(height, ws[2], g), conv_output_size(width, ws[2], g)};
  if (ws[0] != ys[1] || d.out_h != ys[2] || d.out_w != ys[3])
    throw ShapeError("conv_transpose2d: input " + to_string(ys) + " incompatible with weight " +
                     to_string(ws) + " and output size " + std::to_string(height) + "x" +
                     std::to_string(width));
  const std::size_t k = ws[2];
  return make_result(conv_adjoint(y.value(), w.value(), d), "conv_transpose2d", {y, w},
                     [g, k](const Node& self, const Var& gx, const std::vector<bool>& needs) {
                       Var gy, gw;
                       if (needs[0]) gy = conv2d(gx, self.inputs[1], g);
                       if (needs[1]) gw = conv2d_weight_grad(gx, self.inputs[0], g, k);
                       return std::vector<Var>{gy, gw};
                     });
}

Var conv2d_weight_grad(const Var& x, const Var& y, ConvGeometry g, std::size_t kernel) {
  require_rank4(x.shape(), "conv2d_weight_grad input");
  require_rank4(y.shape(), "conv2d_weight_grad output");
  const auto& xs = x.shape();
  const auto& ys = y.shape();
  ConvDims d{xs[0], xs[1], xs[2], xs[3], ys[1], kernel, g.stride, g.padding,
             conv_output_size(xs[2], kernel, g), conv_output_size(xs[3], kernel, g)};
  if (ys[0] != xs[0] || d.out_h != ys[2] || d.out_w != ys[3])
    throw ShapeError("conv2d_weight_grad: incompatible " + to_string(xs) + " and " + to_string(ys));
  const std::size_t h = xs[2], wd = xs[3];
  return make_result(conv_weight(x.value(), y.value(), d), "conv2d_weight_grad", {x, y},
                     [g, h, wd](const Node& self, const Var& gw, const std::vector<bool>& needs) {
                       Var gx, gy;
                       if (needs[0]) gx = conv_transpose2d(self.inputs[1], gw, g, h, wd);
                       if (needs[1]) gy = conv2d(self.inputs[0], gw, g);
                       return std::vector<Var>{gx, gy};
                     });
}

Var detach(const Var& a) { return Var(a.value()); }

}  // namespace sngan::nn
