#include "sngan/architectures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sngan::arch {

using nn::LayerKind;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::dc: return "dc";
    case Variant::sn: return "sn";
    case Variant::sngp: return "sngp";
    case Variant::vanilla_mlp: return "vanilla_mlp";
  }
  return "unknown";
}

std::string to_string(Wiring w) {
  switch (w) {
    case Wiring::none: return "none";
    case Wiring::input_concat: return "input_concat";
    case Wiring::dense_end: return "dense_end";
    case Wiring::fourth_channel: return "fourth_channel";
    case Wiring::tile_conv1_dense: return "tile_conv1_dense";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::dc, Variant::sn, Variant::sngp, Variant::vanilla_mlp})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + s + "' (expected dc, sn, sngp or vanilla_mlp)");
}

Wiring parse_wiring(const std::string& s) {
  for (auto w : {Wiring::none, Wiring::input_concat, Wiring::dense_end, Wiring::fourth_channel,
                 Wiring::tile_conv1_dense})
    if (to_string(w) == s) return w;
  throw std::invalid_argument("unknown wiring '" + s +
                              "' (expected none, input_concat, dense_end, fourth_channel or "
                              "tile_conv1_dense)");
}

Stabilizers default_stabilizers(const std::string& schema, bool conditional) {
  if (schema == "face" && conditional) return {0.5f, 0.5f, 0.9f};
  return {};
}

ModelSpec default_spec(Variant variant) {
  ModelSpec s;
  s.variant = variant;
  if (variant == Variant::vanilla_mlp) {
    s.resolution = 28;
    s.z_dim = 100;
  }
  return s;
}

void ModelSpec::validate() const {
  if (variant == Variant::vanilla_mlp) {
    if (resolution != 28) throw std::invalid_argument("resolution: vanilla_mlp supports 28 only");
    if (wiring != Wiring::none && wiring != Wiring::input_concat)
      throw std::invalid_argument("wiring: vanilla_mlp supports none or input_concat, got " +
                                  to_string(wiring));
  } else {
    if (resolution != 32 && resolution != 64 && resolution != 128)
      throw std::invalid_argument("resolution: " + std::to_string(resolution) +
                                  " unsupported (supported: 32, 64, 128)");
    if (wiring == Wiring::input_concat)
      throw std::invalid_argument("wiring: input_concat applies to vanilla_mlp only");
  }
  if (z_dim == 0) throw std::invalid_argument("z_dim: must be positive");
  if ((wiring == Wiring::none) != (y_dim == 0))
    throw std::invalid_argument(y_dim == 0 ? "wiring: must be none for an unconditional model"
                                           : "wiring: a conditional model needs a wiring");
  if (!(width > 0.0) || !std::isfinite(width)) throw std::invalid_argument("width: must be > 0");
  if (!(stabilizers.dropout >= 0.0f && stabilizers.dropout < 1.0f))
    throw std::invalid_argument("dropout: must lie in [0, 1)");
  if (!(stabilizers.input_noise_variance >= 0.0f))
    throw std::invalid_argument("input_noise_variance: must be >= 0");
  if (!(stabilizers.label_smooth_alpha > 0.0f && stabilizers.label_smooth_alpha <= 1.0f))
    throw std::invalid_argument("label_smooth_alpha: must lie in (0, 1]");
}

namespace {

constexpr float kSlope = 0.1f;
constexpr std::size_t kBaseChannels = 512;
constexpr std::size_t kDiscChannels[] = {64, 64, 128, 128, 256, 256, 512};

std::size_t scaled(std::size_t n, double width) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n * width)));
}

std::size_t generator_stages(std::size_t resolution) {
  std::size_t stages = 0;
  for (std::size_t r = 4; r < resolution; r *= 2) ++stages;
  return stages;
}

void add_input_stabilizers(const Stabilizers& s, std::vector<LayerSpec>& d) {
  if (s.input_noise_variance > 0.0f) d.push_back(LayerSpec::gaussian_noise(s.input_noise_variance));
  if (s.dropout > 0.0f) d.push_back(LayerSpec::dropout(s.dropout));
}

LayerTables mlp_tables(const ModelSpec& spec) {
  LayerTables t;
  t.generator = {LayerSpec::dense(1200), LayerSpec::relu(), LayerSpec::dense(28 * 28),
                 LayerSpec::tanh(), LayerSpec::reshape({1, 28, 28})};
  add_input_stabilizers(spec.stabilizers, t.discriminator);
  t.discriminator.push_back(LayerSpec::flatten());
  t.discriminator.push_back(LayerSpec::dense(240));
  t.discriminator.push_back(LayerSpec::lrelu(kSlope));
  if (spec.stabilizers.dropout > 0.0f) t.discriminator.push_back(LayerSpec::dropout(spec.stabilizers.dropout));
  t.discriminator.push_back(LayerSpec::dense(1));
  return t;
}

LayerTables conv_tables(const ModelSpec& spec) {
  LayerTables t;
  const bool sn = spec.variant != Variant::dc;

  std::size_t ch = scaled(kBaseChannels, spec.width);
  t.generator = {LayerSpec::dense(4 * 4 * ch), LayerSpec::batchnorm(), LayerSpec::relu(),
                 LayerSpec::reshape({ch, 4, 4})};
  for (std::size_t i = 0, n = generator_stages(spec.resolution); i < n; ++i) {
    ch = std::max<std::size_t>(1, ch / 2);
    t.generator.push_back(LayerSpec::deconv(ch, 4, 2, 1));
    t.generator.push_back(LayerSpec::batchnorm());
    t.generator.push_back(LayerSpec::relu());
  }
  t.generator.push_back(LayerSpec::deconv(spec.channels(), 3, 1, 1));
  t.generator.push_back(LayerSpec::tanh());

  add_input_stabilizers(spec.stabilizers, t.discriminator);
  for (std::size_t i = 0; i < std::size(kDiscChannels); ++i) {
    const std::size_t c = scaled(kDiscChannels[i], spec.width);
    t.discriminator.push_back(i % 2 == 0 ? LayerSpec::conv(c, 3, 1, 1, sn)
                                         : LayerSpec::conv(c, 4, 2, 1, sn));
    if (!sn && i > 0) t.discriminator.push_back(LayerSpec::batchnorm());
    t.discriminator.push_back(LayerSpec::lrelu(kSlope));
    if (spec.stabilizers.dropout > 0.0f)
      t.discriminator.push_back(LayerSpec::dropout(spec.stabilizers.dropout));
  }
  t.discriminator.push_back(LayerSpec::flatten());
  t.discriminator.push_back(LayerSpec::dense(1, sn));
  return t;
}

std::size_t index_of_kind(const std::vector<LayerSpec>& v, LayerKind kind) {
  auto it = std::find_if(v.begin(), v.end(), [&](const LayerSpec& s) { return s.kind == kind; });
  if (it == v.end()) throw std::logic_error("layer table has no " + nn::to_string(kind) + " layer");
  return static_cast<std::size_t>(it - v.begin());
}

}  // namespace

LayerTables base_tables(const ModelSpec& spec) {
  return spec.variant == Variant::vanilla_mlp ? mlp_tables(spec) : conv_tables(spec);
}

LayerTables wire_condition(const ModelSpec& spec, LayerTables t) {
  if (spec.wiring == Wiring::none) return t;
  if (spec.y_dim == 0) throw std::invalid_argument("wire_condition: y_dim must be positive");
  const bool sn = spec.variant == Variant::sn || spec.variant == Variant::sngp;
  if ((spec.variant == Variant::vanilla_mlp) != (spec.wiring == Wiring::input_concat))
    throw std::invalid_argument("wiring " + to_string(spec.wiring) + " is incompatible with variant " +
                                to_string(spec.variant));

  t.generator.insert(t.generator.begin(), LayerSpec::concat_condition());

  auto& d = t.discriminator;
  const std::size_t flat = index_of_kind(d, LayerKind::flatten);
  d.insert(d.begin() + static_cast<std::ptrdiff_t>(flat) + 1, LayerSpec::concat_condition());

  if (spec.wiring == Wiring::fourth_channel) {
    const std::size_t conv1 = index_of_kind(d, LayerKind::conv);
    d.insert(d.begin() + static_cast<std::ptrdiff_t>(conv1), LayerSpec::condition_channel(sn));
  } else if (spec.wiring == Wiring::tile_conv1_dense) {
    std::size_t at = index_of_kind(d, LayerKind::conv) + 1;
    while (at < d.size() && (d[at].kind == LayerKind::batchnorm || d[at].kind == LayerKind::lrelu ||
                             d[at].kind == LayerKind::dropout))
      ++at;
    d.insert(d.begin() + static_cast<std::ptrdiff_t>(at), LayerSpec::tile_condition());
  }
  return t;
}

LayerTables layer_tables(const ModelSpec& spec) { return wire_condition(spec, base_tables(spec)); }

GanPair build(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const LayerTables t = layer_tables(spec);
  Rng g_rng = Rng::derived(seed, 1), d_rng = Rng::derived(seed, 2);
  GanPair pair{spec,
               LayerStack("G", {spec.z_dim}, t.generator, g_rng, spec.y_dim),
               LayerStack("D", spec.image_shape(), t.discriminator, d_rng, spec.y_dim)};
  if (pair.generator.output_shape() != spec.image_shape())
    throw std::logic_error("generator table produces " + nn::to_string(pair.generator.output_shape()));
  return pair;
}

Tensor sample_z(std::size_t n, std::size_t z_dim, Rng& rng) {
  Tensor z({n, z_dim});
  for (auto& v : z.data()) v = rng.uniform(-1.0f, 1.0f);
  return z;
}

}  // namespace sngan::arch
