#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sngan/autograd.hpp"
#include "sngan/rng.hpp"
#include "sngan/spectral_norm.hpp"

namespace sngan::nn {

enum class Mode { train, eval };

enum class LayerKind {
  dense,
  conv,
  deconv,
  batchnorm,
  lrelu,
  relu,
  tanh,
  sigmoid,
  dropout,
  gaussian_noise,
  flatten,
  reshape,
  // Conditioning joins: read the condition vector y from the forward context.
  concat_condition,   // [B, F] -> [B, F + Y]
  tile_condition,     // [B, C, H, W] -> [B, C + Y, H, W]
  condition_channel,  // dense(y) -> [B, 1, H, W], appended: [B, C + 1, H, W]
};

std::string to_string(LayerKind kind);

/// Declarative description of one layer. Sizes not relevant to a kind are 0.
struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  std::size_t units = 0;  // dense outputs / conv output channels
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  float slope = 0.0f;     // lrelu
  float rate = 0.0f;      // dropout
  float variance = 0.0f;  // gaussian_noise
  Shape target;           // reshape (per sample)
  bool spectral_norm = false;

  static LayerSpec dense(std::size_t units, bool sn = false);
  static LayerSpec conv(std::size_t channels, std::size_t kernel, std::size_t stride,
                        std::size_t padding, bool sn = false);
  static LayerSpec deconv(std::size_t channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding);
  static LayerSpec batchnorm();
  static LayerSpec lrelu(float slope);
  static LayerSpec relu();
  static LayerSpec tanh();
  static LayerSpec sigmoid();
  static LayerSpec dropout(float rate);
  static LayerSpec gaussian_noise(float variance);
  static LayerSpec flatten();
  static LayerSpec reshape(Shape target);
  static LayerSpec concat_condition();
  static LayerSpec tile_condition();
  static LayerSpec condition_channel(bool sn = false);

  bool has_weights() const {
    return kind == LayerKind::dense || kind == LayerKind::conv || kind == LayerKind::deconv ||
           kind == LayerKind::condition_channel;
  }
};

struct Parameter {
  std::string name;
  Var var;
};

/// Non-trainable state saved with a model (batchnorm running statistics).
struct Buffer {
  std::string name;
  Tensor* tensor;
};

struct ForwardContext {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;  // required by stochastic layers in train mode
  Var condition;       // [B, Y] when the stack is conditional
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Var forward(const Var& x, ForwardContext& ctx) = 0;

  const LayerSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  virtual std::vector<Parameter> parameters() const { return {}; }
  virtual std::vector<Buffer> buffers() { return {}; }
  virtual sn::SpectralState* spectral_state() { return nullptr; }
  /// The weight used by the forward pass (normalized when spectral).
  virtual std::optional<Tensor> effective_weight() const { return std::nullopt; }

 protected:
  Layer(LayerSpec spec, Shape input_shape) : spec_(std::move(spec)), input_shape_(std::move(input_shape)) {}
  LayerSpec spec_;
  Shape input_shape_;   // per sample
  Shape output_shape_;  // per sample
};

/// Instantiates a layer for a per-sample input shape; throws ShapeError when
/// the spec does not fit. `condition_dim` sizes the conditioning joins.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape,
                                  std::size_t condition_dim, const std::string& name, Rng& init_rng);

using GradientMap = std::map<std::string, Tensor>;

/// Ordered sequence of layers with a declared per-sample input shape.
class LayerStack {
 public:
  LayerStack() = default;
  /// Validates the whole chain; a mismatch reports the offending layer index.
  LayerStack(std::string name, Shape input_shape, const std::vector<LayerSpec>& specs,
             Rng& init_rng, std::size_t condition_dim = 0);

  LayerStack(LayerStack&&) noexcept = default;
  LayerStack& operator=(LayerStack&&) noexcept = default;

  /// Records the computation when grad mode is on. `x` is [B, input_shape...].
  Var forward(const Var& x, Mode mode, Rng* rng = nullptr, const Var& condition = {});
  /// Unrecorded forward.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr,
                 const Tensor* condition = nullptr);

  /// Gradient of a single-element loss for every parameter of this stack.
  /// Consumes the computation record.
  GradientMap backward(const Var& loss);

  /// ∂ output / ∂ input for a stack with one output per sample. Parameter
  /// gradients are not touched.
  Tensor input_gradient(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr,
                        const Tensor* condition = nullptr);

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const;
  std::size_t condition_dim() const { return condition_dim_; }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  std::vector<Parameter> parameters() const;
  std::vector<Buffer> buffers();
  /// (layer index, state) for every spectrally normalized layer.
  std::vector<std::pair<std::size_t, sn::SpectralState*>> spectral_states();

 private:
  std::string name_;
  Shape input_shape_;
  std::size_t condition_dim_ = 0;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace sngan::nn
