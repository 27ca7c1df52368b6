#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sngan/layers.hpp"

namespace sngan::arch {

using nn::LayerSpec;
using nn::LayerStack;
using nn::Tensor;

enum class Variant { dc, sn, sngp, vanilla_mlp };
enum class Wiring { none, input_concat, dense_end, fourth_channel, tile_conv1_dense };

std::string to_string(Variant v);
std::string to_string(Wiring w);
Variant parse_variant(const std::string& s);
Wiring parse_wiring(const std::string& s);

/// Discriminator-side stabilizers. All off by default.
struct Stabilizers {
  float dropout = 0.0f;               // on the input and after every hidden layer of D
  float input_noise_variance = 0.0f;  // added to D's image input
  float label_smooth_alpha = 1.0f;    // positive target of the standard D loss

  friend bool operator==(const Stabilizers&, const Stabilizers&) = default;
};

/// Defaults: on (0.5, 0.5, 0.9) only for a conditional face model.
Stabilizers default_stabilizers(const std::string& schema, bool conditional);

struct ModelSpec {
  Variant variant = Variant::sn;
  std::size_t resolution = 32;
  std::size_t z_dim = 128;
  std::size_t y_dim = 0;
  Wiring wiring = Wiring::none;
  /// Multiplies every hidden channel and unit count of the conv variants.
  double width = 1.0;
  Stabilizers stabilizers;

  /// Throws std::invalid_argument with the offending field.
  void validate() const;
  std::size_t channels() const { return variant == Variant::vanilla_mlp ? 1 : 3; }
  bool conditional() const { return y_dim > 0; }
  nn::Shape image_shape() const { return {channels(), resolution, resolution}; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Variant defaults: z_dim 100 and resolution 28 for vanilla_mlp, else 128 and 32.
ModelSpec default_spec(Variant variant);

/// Declarative layer lists for both networks.
struct LayerTables {
  std::vector<LayerSpec> generator;
  std::vector<LayerSpec> discriminator;
};

/// Unconditional tables of a variant (stabilizers included).
LayerTables base_tables(const ModelSpec& spec);

/// Inserts the conditioning joins for spec.wiring. The generator always
/// receives concat(z, y); the discriminator per wiring:
///   input_concat      y joined to the flattened image (vanilla_mlp only)
///   dense_end         y joined to the flatten output
///   fourth_channel    dense(y) reshaped to one extra input channel, plus dense_end
///   tile_conv1_dense  y tiled over the first conv block's output, plus dense_end
LayerTables wire_condition(const ModelSpec& spec, LayerTables tables);

/// Full tables: base_tables followed by wire_condition.
LayerTables layer_tables(const ModelSpec& spec);

struct GanPair {
  ModelSpec spec;
  LayerStack generator;      // [B, z_dim] (+ y) -> [B, C, R, R] in [−1, 1]
  LayerStack discriminator;  // [B, C, R, R] (+ y) -> [B, 1] logits
};

/// Validates the spec and instantiates both stacks with seeded initialization.
GanPair build(const ModelSpec& spec, std::uint64_t seed);

/// z ~ U[−1, 1]^z_dim for n samples.
Tensor sample_z(std::size_t n, std::size_t z_dim, Rng& rng);

}  // namespace sngan::arch
