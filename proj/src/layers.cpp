#include "sngan/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "sngan/ops.hpp"

namespace sngan::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::lrelu: return "lrelu";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::dropout: return "dropout";
    case LayerKind::gaussian_noise: return "gaussian_noise";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    case LayerKind::concat_condition: return "concat_condition";
    case LayerKind::tile_condition: return "tile_condition";
    case LayerKind::condition_channel: return "condition_channel";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::size_t units, bool sn) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  s.spectral_norm = sn;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding, bool sn) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.units = channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.spectral_norm = sn;
  return s;
}

LayerSpec LayerSpec::deconv(std::size_t channels, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  LayerSpec s = conv(channels, kernel, stride, padding);
  s.kind = LayerKind::deconv;
  return s;
}

namespace {
LayerSpec of_kind(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}
}  // namespace

LayerSpec LayerSpec::batchnorm() { return of_kind(LayerKind::batchnorm); }
LayerSpec LayerSpec::lrelu(float slope) {
  LayerSpec s = of_kind(LayerKind::lrelu);
  s.slope = slope;
  return s;
}
LayerSpec LayerSpec::relu() { return of_kind(LayerKind::relu); }
LayerSpec LayerSpec::tanh() { return of_kind(LayerKind::tanh); }
LayerSpec LayerSpec::sigmoid() { return of_kind(LayerKind::sigmoid); }
LayerSpec LayerSpec::dropout(float rate) {
  if (!(rate >= 0.0f && rate < 1.0f)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  LayerSpec s = of_kind(LayerKind::dropout);
  s.rate = rate;
  return s;
}
LayerSpec LayerSpec::gaussian_noise(float variance) {
  if (!(variance >= 0.0f)) throw std::invalid_argument("noise variance must be >= 0");
  LayerSpec s = of_kind(LayerKind::gaussian_noise);
  s.variance = variance;
  return s;
}
LayerSpec LayerSpec::flatten() { return of_kind(LayerKind::flatten); }
LayerSpec LayerSpec::reshape(Shape target) {
  LayerSpec s = of_kind(LayerKind::reshape);
  s.target = std::move(target);
  return s;
}
LayerSpec LayerSpec::concat_condition() { return of_kind(LayerKind::concat_condition); }
LayerSpec LayerSpec::tile_condition() { return of_kind(LayerKind::tile_condition); }
LayerSpec LayerSpec::condition_channel(bool sn) {
  LayerSpec s = of_kind(LayerKind::condition_channel);
  s.spectral_norm = sn;
  return s;
}

namespace {

constexpr float kInitStddev = 0.02f;
constexpr float kBatchNormMomentum = 0.9f;
constexpr float kBatchNormEpsilon = 1e-5f;

Var init_weight(const Shape& shape, Rng& rng) {
  Tensor w(shape);
  for (auto& x : w.data()) x = rng.truncated_normal(kInitStddev);
  return Var(std::move(w), true);
}

Shape batched(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

void require_rank(const Shape& in, std::size_t rank, const LayerSpec& spec) {
  if (in.size() != rank)
    throw ShapeError(to_string(spec.kind) + " expects a rank-" + std::to_string(rank) +
                     " input per sample, got " + to_string(in));
}

const Var& require_condition(const ForwardContext& ctx, std::size_t batch, std::size_t ydim,
                             const char* who) {
  if (!ctx.condition.defined())
    throw std::invalid_argument(std::string(who) + ": stack is conditional but no condition was given");
  if (ctx.condition.shape() != Shape{batch, ydim})
    throw ShapeError(std::string(who) + ": condition shape " + to_string(ctx.condition.shape()) +
                     " does not match [" + std::to_string(batch) + ", " + std::to_string(ydim) + "]");
  return ctx.condition;
}

Rng& require_rng(const ForwardContext& ctx, const char* who) {
  if (!ctx.rng) throw std::invalid_argument(std::string(who) + " in train mode needs a random stream");
  return *ctx.rng;
}

// Weight-bearing base: owns weight, bias and the optional spectral state.
class WeightedLayer : public Layer {
 public:
  std::vector<Parameter> parameters() const override {
    return {{name_ + ".weight", weight_}, {name_ + ".bias", bias_}};
  }
  sn::SpectralState* spectral_state() override { return sn_ ? &*sn_ : nullptr; }
  std::optional<Tensor> effective_weight() const override {
    if (!sn_) return weight_.value();
    NoGradGuard guard;
    auto state = *sn_;
    return sn::normalized_weight(weight_, state, false).value();
  }

 protected:
  WeightedLayer(LayerSpec spec, Shape in, std::string name)
      : Layer(std::move(spec), std::move(in)), name_(std::move(name)) {}

  void init(const Shape& weight_shape, std::size_t bias_size, Rng& rng) {
    weight_ = init_weight(weight_shape, rng);
    bias_ = Var(Tensor({bias_size}, 0.0f), true);
    if (spec_.spectral_norm) sn_ = sn::make_state(weight_.value(), rng);
  }

  Var weight(const ForwardContext& ctx) {
    if (!sn_) return weight_;
    return sn::normalized_weight(weight_, *sn_, ctx.mode == Mode::train);
  }

  std::string name_;
  Var weight_;
  Var bias_;
  std::optional<sn::SpectralState> sn_;
};

class DenseLayer final : public WeightedLayer {
 public:
  DenseLayer(const LayerSpec& spec, const Shape& in, const std::string& name, Rng& rng)
      : WeightedLayer(spec, in, name) {
    require_rank(in, 1, spec);
    if (spec.units == 0) throw ShapeError("dense layer needs a positive unit count");
    output_shape_ = {spec.units};
    init({spec.units, in[0]}, spec.units, rng);
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    Var y = matmul(x, weight(ctx), false, true);
    return add(y, broadcast_channel(bias_, y.shape()));
  }
};

class ConvLayer final : public WeightedLayer {
 public:
  ConvLayer(const LayerSpec& spec, const Shape& in, const std::string& name, Rng& rng)
      : WeightedLayer(spec, in, name) {
    require_rank(in, 3, spec);
    if (spec.units == 0 || spec.kernel == 0 || spec.stride == 0)
      throw ShapeError("conv layer needs positive channels, kernel and stride");
    const ConvGeometry g{spec.stride, spec.padding};
    output_shape_ = {spec.units, conv_output_size(in[1], spec.kernel, g),
                     conv_output_size(in[2], spec.kernel, g)};
    init({spec.units, in[0], spec.kernel, spec.kernel}, spec.units, rng);
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    Var y = conv2d(x, weight(ctx), {spec_.stride, spec_.padding});
    return add(y, broadcast_channel(bias_, y.shape()));
  }
};

class DeconvLayer final : public WeightedLayer {
 public:
  DeconvLayer(const LayerSpec& spec, const Shape& in, const std::string& name, Rng& rng)
      : WeightedLayer(spec, in, name) {
    require_rank(in, 3, spec);
    if (spec.units == 0 || spec.kernel == 0 || spec.stride == 0)
      throw ShapeError("deconv layer needs positive channels, kernel and stride");
    if (spec.spectral_norm) throw std::invalid_argument("deconv layers are not spectrally normalized");
    auto out = [&](std::size_t n) {
      const std::size_t full = (n - 1) * spec.stride + spec.kernel;
      if (full <= 2 * spec.padding) throw ShapeError("deconv output would be empty");
      return full - 2 * spec.padding;
    };
    output_shape_ = {spec.units, out(in[1]), out(in[2])};
    // Stored as the adjoint convolution's kernel: [in, out, K, K].
    init({in[0], spec.units, spec.kernel, spec.kernel}, spec.units, rng);
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    Var y = conv_transpose2d(x, weight(ctx), {spec_.stride, spec_.padding}, output_shape_[1],
                             output_shape_[2]);
    return add(y, broadcast_channel(bias_, y.shape()));
  }
};

class ConditionChannelLayer final : public WeightedLayer {
 public:
  ConditionChannelLayer(const LayerSpec& spec, const Shape& in, std::size_t ydim,
                        const std::string& name, Rng& rng)
      : WeightedLayer(spec, in, name), ydim_(ydim) {
    require_rank(in, 3, spec);
    if (ydim == 0) throw ShapeError("condition_channel in an unconditional stack");
    output_shape_ = {in[0] + 1, in[1], in[2]};
    init({in[1] * in[2], ydim}, in[1] * in[2], rng);
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    const std::size_t batch = x.shape()[0];
    const Var& y = require_condition(ctx, batch, ydim_, "condition_channel");
    Var p = matmul(y, weight(ctx), false, true);
    p = add(p, broadcast_channel(bias_, p.shape()));
    p = reshape(p, {batch, 1, input_shape_[1], input_shape_[2]});
    return concat_channels(x, p);
  }

 private:
  std::size_t ydim_;
};

// Training-mode batch normalization. Its backward is computed directly rather
// than from differentiable ops, so it supports a single level of
// differentiation only.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                     Tensor& running_var) {
  const auto& s = x.shape();
  const std::size_t outer = s[0], channels = s[1], inner = numel(s) / (outer * channels);
  const std::size_t count = outer * inner;
  auto xhat = std::make_shared<Tensor>(s);
  auto inv_std = std::make_shared<std::vector<float>>(channels);
  Tensor out(s);
  const float* src = x.value().raw();
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) mean += src[(o * channels + c) * inner + i];
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const double d = src[(o * channels + c) * inner + i] - mean;
        var += d * d;
      }
    var /= static_cast<double>(count);
    const float is = static_cast<float>(1.0 / std::sqrt(var + kBatchNormEpsilon));
    (*inv_std)[c] = is;
    const float g = gamma.value()[c], b = beta.value()[c], m = static_cast<float>(mean);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = (o * channels + c) * inner + i;
        const float xh = (src[k] - m) * is;
        (*xhat)[k] = xh;
        out[k] = g * xh + b;
      }
    const double unbiased = count > 1 ? var * count / (count - 1) : var;
    running_mean[c] = kBatchNormMomentum * running_mean[c] + (1 - kBatchNormMomentum) * m;
    running_var[c] = kBatchNormMomentum * running_var[c] +
                     (1 - kBatchNormMomentum) * static_cast<float>(unbiased);
  }

  return make_result(
      std::move(out), "batch_norm", {x, gamma, beta},
      [xhat, inv_std, outer, channels, inner, count](const Node& self, const Var& gv,
                                                     const std::vector<bool>& needs) {
        if (grad_enabled())
          throw std::logic_error("batchnorm in train mode does not support double backward");
        const Tensor& g = gv.value();
        Tensor gx(self.inputs[0].shape()), gg({channels}), gb({channels});
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = (o * channels + c) * inner + i;
              sum_g += g[k];
              sum_gx += g[k] * (*xhat)[k];
            }
          gg[c] = static_cast<float>(sum_gx);
          gb[c] = static_cast<float>(sum_g);
          const float scale = self.inputs[1].value()[c] * (*inv_std)[c] / static_cast<float>(count);
          const float mg = static_cast<float>(sum_g), mgx = static_cast<float>(sum_gx);
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = (o * channels + c) * inner + i;
              gx[k] = scale * (static_cast<float>(count) * g[k] - mg - (*xhat)[k] * mgx);
            }
        }
        return std::vector<Var>{needs[0] ? Var(std::move(gx)) : Var(),
                                needs[1] ? Var(std::move(gg)) : Var(),
                                needs[2] ? Var(std::move(gb)) : Var()};
      });
}

class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(const LayerSpec& spec, const Shape& in, const std::string& name)
      : Layer(spec, in), name_(name) {
    if (in.empty()) throw ShapeError("batchnorm needs a channel axis");
    output_shape_ = in;
    const std::size_t c = in[0];
    gamma_ = Var(Tensor({c}, 1.0f), true);
    beta_ = Var(Tensor({c}, 0.0f), true);
    running_mean_ = Tensor({c}, 0.0f);
    running_var_ = Tensor({c}, 1.0f);
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    if (ctx.mode == Mode::train) return batch_norm_train(x, gamma_, beta_, running_mean_, running_var_);
    // Eval: per-channel affine map from running statistics.
    Tensor inv(running_var_.shape());
    for (std::size_t c = 0; c < inv.size(); ++c)
      inv[c] = 1.0f / std::sqrt(running_var_[c] + kBatchNormEpsilon);
    const Var a = mul_const(gamma_, inv);
    Tensor neg_mean = running_mean_;
    for (auto& v : neg_mean.data()) v = -v;
    const Var shift = add(beta_, mul(a, Var(neg_mean)));
    return add(mul(x, broadcast_channel(a, x.shape())), broadcast_channel(shift, x.shape()));
  }
  std::vector<Parameter> parameters() const override {
    return {{name_ + ".gamma", gamma_}, {name_ + ".beta", beta_}};
  }
  std::vector<Buffer> buffers() override {
    return {{name_ + ".running_mean", &running_mean_}, {name_ + ".running_var", &running_var_}};
  }

 private:
  std::string name_;
  Var gamma_, beta_;
  Tensor running_mean_, running_var_;
};

class ActivationLayer final : public Layer {
 public:
  ActivationLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in) { output_shape_ = in; }
  Var forward(const Var& x, ForwardContext&) override {
    switch (spec_.kind) {
      case LayerKind::lrelu: return leaky_relu(x, spec_.slope);
      case LayerKind::relu: return relu(x);
      case LayerKind::tanh: return tanh(x);
      case LayerKind::sigmoid: return sigmoid(x);
      default: throw std::logic_error("not an activation");
    }
  }
};

class DropoutLayer final : public Layer {
 public:
  DropoutLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in), rate_(spec.rate) {
    output_shape_ = in;
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    if (ctx.mode == Mode::eval || rate_ == 0.0f) return x;
    Rng& rng = require_rng(ctx, "dropout");
    const float keep = 1.0f - rate_;
    Tensor mask(x.shape());
    for (auto& m : mask.data()) m = rng.bernoulli(keep) ? 1.0f / keep : 0.0f;
    return mul_const(x, mask);
  }

 private:
  const float rate_;
};

class GaussianNoiseLayer final : public Layer {
 public:
  GaussianNoiseLayer(const LayerSpec& spec, const Shape& in)
      : Layer(spec, in), variance_(spec.variance) {
    output_shape_ = in;
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    if (ctx.mode == Mode::eval || variance_ == 0.0f) return x;
    Rng& rng = require_rng(ctx, "gaussian_noise");
    const double sd = std::sqrt(static_cast<double>(variance_));
    Tensor noise(x.shape());
    for (auto& n : noise.data()) n = static_cast<float>(rng.normal() * sd);
    return add_const(x, noise);
  }

 private:
  const float variance_;
};

class ReshapeLayer final : public Layer {
 public:
  ReshapeLayer(const LayerSpec& spec, const Shape& in) : Layer(spec, in) {
    output_shape_ = spec.kind == LayerKind::flatten ? Shape{numel(in)} : spec.target;
    if (numel(output_shape_) != numel(in))
      throw ShapeError("cannot reshape " + to_string(in) + " to " + to_string(output_shape_));
  }
  Var forward(const Var& x, ForwardContext&) override {
    return reshape(x, batched(x.shape()[0], output_shape_));
  }
};

class ConcatConditionLayer final : public Layer {
 public:
  ConcatConditionLayer(const LayerSpec& spec, const Shape& in, std::size_t ydim)
      : Layer(spec, in), ydim_(ydim) {
    require_rank(in, 1, spec);
    if (ydim == 0) throw ShapeError("concat_condition in an unconditional stack");
    output_shape_ = {in[0] + ydim};
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    return concat_channels(x, require_condition(ctx, x.shape()[0], ydim_, "concat_condition"));
  }

 private:
  std::size_t ydim_;
};

class TileConditionLayer final : public Layer {
 public:
  TileConditionLayer(const LayerSpec& spec, const Shape& in, std::size_t ydim)
      : Layer(spec, in), ydim_(ydim) {
    require_rank(in, 3, spec);
    if (ydim == 0) throw ShapeError("tile_condition in an unconditional stack");
    output_shape_ = {in[0] + ydim, in[1], in[2]};
  }
  Var forward(const Var& x, ForwardContext& ctx) override {
    const Var& y = require_condition(ctx, x.shape()[0], ydim_, "tile_condition");
    return concat_channels(x, broadcast_spatial(y, input_shape_[1], input_shape_[2]));
  }

 private:
  std::size_t ydim_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& in, std::size_t ydim,
                                  const std::string& name, Rng& rng) {
  if (spec.spectral_norm && spec.kind != LayerKind::dense && spec.kind != LayerKind::conv &&
      spec.kind != LayerKind::condition_channel)
    throw std::invalid_argument("spectral normalization applies to dense and conv weights only");
  switch (spec.kind) {
    case LayerKind::dense: return std::make_unique<DenseLayer>(spec, in, name, rng);
    case LayerKind::conv: return std::make_unique<ConvLayer>(spec, in, name, rng);
    case LayerKind::deconv: return std::make_unique<DeconvLayer>(spec, in, name, rng);
    case LayerKind::batchnorm: return std::make_unique<BatchNormLayer>(spec, in, name);
    case LayerKind::lrelu:
    case LayerKind::relu:
    case LayerKind::tanh:
    case LayerKind::sigmoid: return std::make_unique<ActivationLayer>(spec, in);
    case LayerKind::dropout: return std::make_unique<DropoutLayer>(spec, in);
    case LayerKind::gaussian_noise: return std::make_unique<GaussianNoiseLayer>(spec, in);
    case LayerKind::flatten:
    case LayerKind::reshape: return std::make_unique<ReshapeLayer>(spec, in);
    case LayerKind::concat_condition: return std::make_unique<ConcatConditionLayer>(spec, in, ydim);
    case LayerKind::tile_condition: return std::make_unique<TileConditionLayer>(spec, in, ydim);
    case LayerKind::condition_channel:
      return std::make_unique<ConditionChannelLayer>(spec, in, ydim, name, rng);
  }
  throw std::invalid_argument("unknown layer kind");
}

// ----------------------------------------------------------------- LayerStack

LayerStack::LayerStack(std::string name, Shape input_shape, const std::vector<LayerSpec>& specs,
                       Rng& init_rng, std::size_t condition_dim)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), condition_dim_(condition_dim) {
  Shape current = input_shape_;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      layers_.push_back(make_layer(specs[i], current, condition_dim, name_ + "." + std::to_string(i),
                                   init_rng));
    } catch (const std::exception& e) {
      throw ShapeError(name_ + " layer " + std::to_string(i) + " (" + to_string(specs[i].kind) +
                       "): " + e.what());
    }
    current = layers_.back()->output_shape();
  }
}

Shape LayerStack::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back()->output_shape();
}

Var LayerStack::forward(const Var& x, Mode mode, Rng* rng, const Var& condition) {
  const auto& s = x.shape();
  if (s.size() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(), s.begin() + 1))
    throw ShapeError(name_ + ": input " + to_string(s) + " does not match declared [B, " +
                     to_string(input_shape_).substr(1));
  ForwardContext ctx{mode, rng, condition};
  Var h = x;
  for (auto& layer : layers_) h = layer->forward(h, ctx);
  return h;
}

Tensor LayerStack::forward(const Tensor& x, Mode mode, Rng* rng, const Tensor* condition) {
  NoGradGuard guard;
  return forward(Var(x), mode, rng, condition ? Var(*condition) : Var()).value();
}

GradientMap LayerStack::backward(const Var& loss) {
  const auto params = parameters();
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(p.var);
  const auto grads = grad(loss, leaves);
  GradientMap out;
  for (std::size_t i = 0; i < params.size(); ++i) out.emplace(params[i].name, grads[i].value());
  return out;
}

Tensor LayerStack::input_gradient(const Tensor& x, Mode mode, Rng* rng, const Tensor* condition) {
  const Var input(x, true);
  const Var out = forward(input, mode, rng, condition ? Var(*condition) : Var());
  if (out.shape().size() != 2 || out.shape()[1] != 1)
    throw ShapeError(name_ + ": input_gradient needs one output per sample, got " +
                     to_string(out.shape()));
  return grad(sum_all(out), {input})[0].value();
}

std::vector<Parameter> LayerStack::parameters() const {
  std::vector<Parameter> out;
  for (const auto& layer : layers_) {
    auto p = layer->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Buffer> LayerStack::buffers() {
  std::vector<Buffer> out;
  for (auto& layer : layers_) {
    auto b = layer->buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::vector<std::pair<std::size_t, sn::SpectralState*>> LayerStack::spectral_states() {
  std::vector<std::pair<std::size_t, sn::SpectralState*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (auto* s = layers_[i]->spectral_state()) out.emplace_back(i, s);
  return out;
}

}  // namespace sngan::nn
