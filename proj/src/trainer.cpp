#include "sngan/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "sngan/ops.hpp"

namespace sngan::train {

namespace fs = std::filesystem;
using arch::Variant;
using nn::Mode;
using nn::NoGradGuard;
using nn::Var;

loss::LossConfig TrainConfig::loss() const {
  return {objective, lambda_gp, model.stabilizers.label_smooth_alpha, model.stabilizers.input_noise_variance};
}

void TrainConfig::validate() const {
  model.validate();
  loss().validate();
  if (lambda_gp > 0.0f && model.variant == Variant::dc)
    throw std::invalid_argument("loss.lambda_gp: the gradient penalty needs a discriminator without batchnorm");
  auto check_adam = [](const nn::AdamParams& p, const std::string& section) {
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(section + "." + e.what());
    }
  };
  check_adam(adam_d, "adam_d");
  check_adam(adam_g, "adam_g");
  if (batch_size == 0) throw std::invalid_argument("train.batch_size: must be positive");
  if (total_iterations == 0) throw std::invalid_argument("train.total_iterations: must be positive");
  if (d_steps_per_g_step == 0) throw std::invalid_argument("train.d_steps_per_g_step: must be positive");
  if (log_every == 0) throw std::invalid_argument("train.log_every: must be positive");
  if (sample_every == 0) throw std::invalid_argument("train.sample_every: must be positive");
  if (checkpoint_every == 0) throw std::invalid_argument("train.checkpoint_every: must be positive");
}

TrainConfig default_config(Variant variant) {
  TrainConfig c;
  c.model = arch::default_spec(variant);
  if (variant == Variant::sngp) {
    c.objective = loss::Objective::wasserstein;
    c.lambda_gp = 1.0f;
    c.adam_d = c.adam_g = {5e-5f, 0.0f, 0.9f, 1e-8f};
  } else {
    c.adam_d = c.adam_g = {2e-4f, 0.5f, 0.999f, 1e-8f};
  }
  return c;
}

TrainState init_state(const TrainConfig& config, std::optional<cond::ConditionSchema> schema) {
  config.validate();
  if (config.model.conditional()) {
    if (!schema) throw std::invalid_argument("a conditional model needs a condition schema");
    if (schema->dim() != config.model.y_dim)
      throw std::invalid_argument("model.y_dim is " + std::to_string(config.model.y_dim) + " but schema " +
                                  schema->name + " has " + std::to_string(schema->dim()) + " attributes");
  }
  TrainState s{config,
               config.model.conditional() ? std::move(schema) : std::nullopt,
               arch::build(config.model, config.seed),
               {config.adam_d, {}, {}, 0},
               {config.adam_g, {}, {}, 0},
               Rng::derived(config.seed, 3),
               0,
               {},
               {},
               std::nullopt,
               {},
               {}};
  Rng bank = Rng::derived(config.seed, 4);
  s.z_bank = arch::sample_z(kGridCount, config.model.z_dim, bank);
  if (s.schema) {
    const std::string split = config.grid_split.empty() ? s.schema->attributes.front() : config.grid_split;
    s.grid_conditions = cond::to_tensor(
        cond::grid_conditions(*s.schema, split, kGridCount, Rng::derived(config.seed, 5).next_u64()),
        s.schema->dim());
  } else if (!config.grid_split.empty()) {
    throw std::invalid_argument("train.grid_split: unconditional model has no attributes");
  }
  return s;
}

namespace {

void check_batch(const TrainState& s, const data::Batch& batch) {
  const auto& spec = s.config.model;
  const auto& shape = batch.images.shape();
  if (shape.size() != 4 || shape[0] == 0 || nn::Shape(shape.begin() + 1, shape.end()) != spec.image_shape())
    throw nn::ShapeError("batch images " + nn::to_string(shape) + " do not match the model's [B, " +
                         std::to_string(spec.channels()) + ", " + std::to_string(spec.resolution) + ", " +
                         std::to_string(spec.resolution) + "]");
  if (spec.conditional() != batch.conditions.has_value())
    throw std::invalid_argument(spec.conditional() ? "conditional model given a batch without conditions"
                                                   : "unconditional model given a batch with conditions");
  if (batch.conditions && batch.conditions->shape() != nn::Shape{shape[0], spec.y_dim})
    throw nn::ShapeError("batch conditions " + nn::to_string(batch.conditions->shape()) +
                         " do not match y_dim " + std::to_string(spec.y_dim));
}

std::string describe(double v) {
  std::ostringstream o;
  o << std::setprecision(9) << v;
  return o.str();
}

}  // namespace

StepLosses train_step(TrainState& s, const data::Batch& batch) {
  check_batch(s, batch);
  auto& G = s.pair.generator;
  auto& D = s.pair.discriminator;
  const auto& spec = s.config.model;
  const std::size_t n = batch.images.dim(0);
  const Var y = batch.conditions ? Var(*batch.conditions) : Var();
  const std::uint64_t next_iteration = s.iteration + 1;
  const bool standard = s.config.objective == loss::Objective::standard;
  StepLosses out;

  for (std::size_t k = 0; k < s.config.d_steps_per_g_step; ++k) {
    const Tensor z = arch::sample_z(n, spec.z_dim, s.rng);
    Tensor fake;
    {
      NoGradGuard guard;
      fake = G.forward(Var(z), Mode::train, &s.rng, y).value();
    }
    const Var d_real = D.forward(Var(batch.images), Mode::train, &s.rng, y);
    const Var d_fake = D.forward(Var(fake), Mode::train, &s.rng, y);
    Var d_loss;
    out.penalty = 0.0;
    if (standard) {
      d_loss = loss::standard_d_loss_logits(d_real, d_fake, spec.stabilizers.label_smooth_alpha);
    } else {
      d_loss = loss::wasserstein_losses(d_real, d_fake).d_loss;
      if (s.config.lambda_gp > 0.0f) {
        const loss::Critic critic = [&](const Var& x) { return D.forward(x, Mode::train, &s.rng, y); };
        const Var pen = loss::gradient_penalty(critic, batch.images, fake, s.config.lambda_gp, s.rng);
        out.penalty = pen.value().item();
        d_loss = nn::add(d_loss, pen);
      }
    }
    out.d_loss = d_loss.value().item();
    if (!std::isfinite(out.d_loss))
      throw NumericError("non-finite loss at iteration " + std::to_string(next_iteration) +
                         ": d_loss=" + describe(out.d_loss) + " g_loss=not computed (penalty=" +
                         describe(out.penalty) + ")");
    nn::adam_step(s.opt_d, D.parameters(), D.backward(d_loss));
  }

  const Tensor z = arch::sample_z(n, spec.z_dim, s.rng);
  const Var fake = G.forward(Var(z), Mode::train, &s.rng, y);
  const Var score = D.forward(fake, Mode::train, &s.rng, y);
  const Var g_loss = standard ? loss::standard_g_loss_logits(score) : loss::wasserstein_losses(score, score).g_loss;
  out.g_loss = g_loss.value().item();
  if (!std::isfinite(out.g_loss))
    throw NumericError("non-finite loss at iteration " + std::to_string(next_iteration) +
                       ": d_loss=" + describe(out.d_loss) + " g_loss=" + describe(out.g_loss));
  nn::adam_step(s.opt_g, G.parameters(), G.backward(g_loss));

  s.iteration = next_iteration;
  if (s.iteration % s.config.log_every == 0) s.history.push_back({s.iteration, out.d_loss, out.g_loss});
  return out;
}

Tensor generate(arch::GanPair& pair, const Tensor& z, const Tensor* y) {
  const auto& spec = pair.spec;
  if (z.rank() != 2 || z.dim(1) != spec.z_dim)
    throw nn::ShapeError("z must be [n, " + std::to_string(spec.z_dim) + "], got " + nn::to_string(z.shape()));
  if (spec.conditional() && !y) throw std::invalid_argument("conditional generator needs condition vectors");
  if (!spec.conditional() && y) throw std::invalid_argument("unconditional generator takes no condition vectors");
  if (y && y->shape() != nn::Shape{z.dim(0), spec.y_dim})
    throw nn::ShapeError("conditions must be [" + std::to_string(z.dim(0)) + ", " + std::to_string(spec.y_dim) +
                         "], got " + nn::to_string(y->shape()));
  return pair.generator.forward(z, Mode::eval, nullptr, y);
}

img::Image sample_grid(TrainState& s, const Tensor* conditions) {
  const Tensor* y = conditions;
  if (!y && s.grid_conditions) y = &*s.grid_conditions;
  if (y && y->dim(0) != kGridCount)
    throw std::invalid_argument("grid conditions must have " + std::to_string(kGridCount) + " rows");
  return data::tile_grid(generate(s.pair, s.z_bank, y), kGridSide);
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'S', 'N', 'G', 'A', 'N', 'C', 'K', 'P'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u64(std::uint64_t v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    buf_ += s;
  }
  void tensor(const Tensor& t) {
    u64(t.rank());
    for (auto d : t.shape()) u64(d);
    buf_.append(reinterpret_cast<const char*>(t.raw()), t.size() * sizeof(float));
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}
  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::string str() {
    const std::size_t n = size();
    return std::string(take(n), n);
  }
  Tensor tensor() {
    const std::size_t rank = size();
    if (rank == 0 || rank > 8) throw CheckpointError("corrupt checkpoint: bad tensor rank");
    nn::Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = size();
      if (d == 0) throw CheckpointError("corrupt checkpoint: zero tensor dimension");
      count *= d;
    }
    std::vector<float> values(count);
    std::memcpy(values.data(), take(count * sizeof(float)), count * sizeof(float));
    return Tensor(std::move(shape), std::move(values));
  }
  std::vector<double> doubles() {
    std::vector<double> v(size());
    std::memcpy(v.data(), take(v.size() * sizeof(double)), v.size() * sizeof(double));
    return v;
  }
  bool done() const { return pos_ == end_; }

 private:
  std::size_t size() {
    const std::uint64_t n = u64();
    if (n > end_) throw CheckpointError("corrupt checkpoint: implausible length");
    return static_cast<std::size_t>(n);
  }
  const char* take(std::size_t n) {
    if (n > end_ - pos_) throw CheckpointError("corrupt checkpoint: truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void write_adam_params(Writer& w, const nn::AdamParams& p) {
  w.pod(p.learning_rate);
  w.pod(p.beta1);
  w.pod(p.beta2);
  w.pod(p.epsilon);
}

nn::AdamParams read_adam_params(Reader& r) {
  nn::AdamParams p;
  p.learning_rate = r.pod<float>();
  p.beta1 = r.pod<float>();
  p.beta2 = r.pod<float>();
  p.epsilon = r.pod<float>();
  return p;
}

void write_config(Writer& w, const TrainConfig& c) {
  const auto& m = c.model;
  w.pod(static_cast<std::uint32_t>(m.variant));
  w.u64(m.resolution);
  w.u64(m.z_dim);
  w.u64(m.y_dim);
  w.pod(static_cast<std::uint32_t>(m.wiring));
  w.pod(m.width);
  w.pod(m.stabilizers.dropout);
  w.pod(m.stabilizers.input_noise_variance);
  w.pod(m.stabilizers.label_smooth_alpha);
  w.pod(static_cast<std::uint32_t>(c.objective));
  w.pod(c.lambda_gp);
  write_adam_params(w, c.adam_d);
  write_adam_params(w, c.adam_g);
  for (std::uint64_t v : {c.batch_size, c.total_iterations, c.d_steps_per_g_step, c.log_every, c.sample_every,
                          c.checkpoint_every})
    w.u64(v);
  w.u64(c.seed);
  w.str(c.grid_split);
}

TrainConfig read_config(Reader& r) {
  TrainConfig c;
  auto& m = c.model;
  const auto variant = r.pod<std::uint32_t>();
  if (variant > static_cast<std::uint32_t>(Variant::vanilla_mlp)) throw CheckpointError("corrupt checkpoint: variant");
  m.variant = static_cast<Variant>(variant);
  m.resolution = r.u64();
  m.z_dim = r.u64();
  m.y_dim = r.u64();
  const auto wiring = r.pod<std::uint32_t>();
  if (wiring > static_cast<std::uint32_t>(arch::Wiring::tile_conv1_dense))
    throw CheckpointError("corrupt checkpoint: wiring");
  m.wiring = static_cast<arch::Wiring>(wiring);
  m.width = r.pod<double>();
  m.stabilizers.dropout = r.pod<float>();
  m.stabilizers.input_noise_variance = r.pod<float>();
  m.stabilizers.label_smooth_alpha = r.pod<float>();
  const auto objective = r.pod<std::uint32_t>();
  if (objective > 1) throw CheckpointError("corrupt checkpoint: objective");
  c.objective = static_cast<loss::Objective>(objective);
  c.lambda_gp = r.pod<float>();
  c.adam_d = read_adam_params(r);
  c.adam_g = read_adam_params(r);
  for (std::size_t* v : {&c.batch_size, &c.total_iterations, &c.d_steps_per_g_step, &c.log_every, &c.sample_every,
                         &c.checkpoint_every})
    *v = r.u64();
  c.seed = r.u64();
  c.grid_split = r.str();
  return c;
}

void write_schema(Writer& w, const std::optional<cond::ConditionSchema>& s) {
  w.pod<std::uint8_t>(s ? 1 : 0);
  if (!s) return;
  w.str(s->name);
  w.pod(static_cast<std::uint32_t>(s->encoding));
  w.u64(s->attributes.size());
  for (const auto& a : s->attributes) w.str(a);
  w.u64(s->exclusive.size());
  for (const auto& [a, b] : s->exclusive) {
    w.str(a);
    w.str(b);
  }
}

std::optional<cond::ConditionSchema> read_schema(Reader& r) {
  if (r.pod<std::uint8_t>() == 0) return std::nullopt;
  cond::ConditionSchema s;
  s.name = r.str();
  const auto enc = r.pod<std::uint32_t>();
  if (enc > 1) throw CheckpointError("corrupt checkpoint: schema encoding");
  s.encoding = static_cast<cond::Encoding>(enc);
  s.attributes.resize(r.u64());
  for (auto& a : s.attributes) a = r.str();
  s.exclusive.resize(r.u64());
  for (auto& [a, b] : s.exclusive) {
    a = r.str();
    b = r.str();
  }
  return s;
}

void write_stack(Writer& w, const nn::LayerStack& stack) {
  auto& mutable_stack = const_cast<nn::LayerStack&>(stack);
  const auto params = stack.parameters();
  w.u64(params.size());
  for (const auto& p : params) {
    w.str(p.name);
    w.tensor(p.var.value());
  }
  const auto buffers = mutable_stack.buffers();
  w.u64(buffers.size());
  for (const auto& b : buffers) {
    w.str(b.name);
    w.tensor(*b.tensor);
  }
  const auto states = mutable_stack.spectral_states();
  w.u64(states.size());
  for (const auto& [index, st] : states) {
    w.u64(index);
    w.doubles(st->u);
    w.doubles(st->v);
    w.u64(st->iterations);
  }
}

void assign(Tensor& dst, const Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape())
    throw CheckpointError("checkpoint tensor " + name + " has shape " + nn::to_string(src.shape()) +
                          ", model expects " + nn::to_string(dst.shape()));
  dst = src;
}

void read_stack(Reader& r, nn::LayerStack& stack) {
  auto params = stack.parameters();
  if (r.u64() != params.size()) throw CheckpointError("checkpoint parameter count does not match the model");
  for (auto& p : params) {
    const std::string name = r.str();
    if (name != p.name) throw CheckpointError("checkpoint parameter " + name + " where " + p.name + " was expected");
    assign(p.var.leaf_value(), r.tensor(), name);
  }
  auto buffers = stack.buffers();
  if (r.u64() != buffers.size()) throw CheckpointError("checkpoint buffer count does not match the model");
  for (auto& b : buffers) {
    const std::string name = r.str();
    if (name != b.name) throw CheckpointError("checkpoint buffer " + name + " where " + b.name + " was expected");
    assign(*b.tensor, r.tensor(), name);
  }
  auto states = stack.spectral_states();
  if (r.u64() != states.size()) throw CheckpointError("checkpoint spectral state count does not match the model");
  for (auto& [index, st] : states) {
    if (r.u64() != index) throw CheckpointError("checkpoint spectral state for an unexpected layer");
    auto u = r.doubles(), v = r.doubles();
    if (u.size() != st->u.size() || v.size() != st->v.size())
      throw CheckpointError("checkpoint spectral state size does not match the model");
    st->u = std::move(u);
    st->v = std::move(v);
    st->iterations = r.u64();
  }
}

void write_adam(Writer& w, const nn::AdamState& a) {
  w.u64(a.step);
  write_adam_params(w, a.params);
  w.u64(a.first_moment.size());
  for (const auto& [name, m] : a.first_moment) {
    w.str(name);
    w.tensor(m);
    w.tensor(a.second_moment.at(name));
  }
}

nn::AdamState read_adam(Reader& r) {
  nn::AdamState a;
  a.step = r.u64();
  a.params = read_adam_params(r);
  const std::size_t n = r.u64();
  for (std::size_t i = 0; i < n; ++i) {
    std::string name = r.str();
    Tensor m = r.tensor();
    Tensor v = r.tensor();
    a.first_moment.emplace(name, std::move(m));
    a.second_moment.emplace(std::move(name), std::move(v));
  }
  return a;
}

}  // namespace

std::string model_bytes(const nn::LayerStack& stack) {
  Writer w;
  write_stack(w, stack);
  return std::move(w.buffer());
}

void save_checkpoint(const TrainState& s, const fs::path& path) {
  Writer w;
  w.buffer().append(kMagic, sizeof(kMagic));
  w.pod(kCheckpointVersion);
  w.str(s.config_echo);
  write_config(w, s.config);
  write_schema(w, s.schema);
  w.u64(s.iteration);
  w.str(s.rng.state());
  w.u64(s.history.size());
  for (const auto& h : s.history) {
    w.u64(h.iteration);
    w.pod(h.d_loss);
    w.pod(h.g_loss);
  }
  w.tensor(s.z_bank);
  w.pod<std::uint8_t>(s.grid_conditions ? 1 : 0);
  if (s.grid_conditions) w.tensor(*s.grid_conditions);
  w.u64(s.data_position.epoch);
  w.u64(s.data_position.cursor);
  write_stack(w, s.pair.generator);
  write_stack(w, s.pair.discriminator);
  write_adam(w, s.opt_d);
  write_adam(w, s.opt_g);
  w.u64(fnv1a(w.buffer().data(), w.buffer().size()));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

TrainState load_checkpoint(const fs::path& path, const arch::ModelSpec* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header = sizeof(kMagic) + sizeof(std::uint32_t);
  if (bytes.size() < header + sizeof(std::uint64_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) throw CheckpointError("checkpoint " + path.string() + " is corrupt (checksum)");

  Reader r(bytes, body);
  r.pod<std::uint64_t>();  // magic
  r.pod<std::uint32_t>();  // version
  std::string echo = r.str();
  TrainConfig config = read_config(r);
  if (expected && !(*expected == config.model))
    throw CheckpointError("checkpoint model spec (" + arch::to_string(config.model.variant) + ", " +
                          std::to_string(config.model.resolution) + "px, wiring " +
                          arch::to_string(config.model.wiring) + ") does not match the configured model");
  auto schema = read_schema(r);
  TrainState s = init_state(config, schema);
  s.config_echo = std::move(echo);
  s.iteration = r.u64();
  s.rng.restore(r.str());
  s.history.resize(r.u64());
  for (auto& h : s.history) {
    h.iteration = r.u64();
    h.d_loss = r.pod<double>();
    h.g_loss = r.pod<double>();
  }
  assign(s.z_bank, r.tensor(), "z_bank");
  if (r.pod<std::uint8_t>()) {
    if (!s.grid_conditions) throw CheckpointError("checkpoint has grid conditions for an unconditional model");
    assign(*s.grid_conditions, r.tensor(), "grid_conditions");
  }
  s.data_position.epoch = r.u64();
  s.data_position.cursor = r.u64();
  read_stack(r, s.pair.generator);
  read_stack(r, s.pair.discriminator);
  s.opt_d = read_adam(r);
  s.opt_g = read_adam(r);
  if (!r.done()) throw CheckpointError("checkpoint has trailing data");
  return s;
}

// ---------------------------------------------------------------- run loop

void write_loss_log(const fs::path& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write loss log " + path.string());
  out << "iteration\td_loss\tg_loss\n" << std::setprecision(9);
  for (const auto& h : history) out << h.iteration << '\t' << h.d_loss << '\t' << h.g_loss << '\n';
}

std::vector<LossRecord> read_loss_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open loss log " + path.string());
  std::vector<LossRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("iteration", 0) == 0) continue;
    std::istringstream cells(line);
    LossRecord r;
    if (!(cells >> r.iteration >> r.d_loss >> r.g_loss))
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed loss row");
    out.push_back(r);
  }
  return out;
}

namespace {

std::string numbered(const std::string& prefix, std::uint64_t n, const std::string& ext) {
  std::ostringstream o;
  o << prefix << std::setw(8) << std::setfill('0') << n << ext;
  return o.str();
}

}  // namespace

void run(TrainState& s, const data::Dataset& dataset, const RunPaths& paths,
         const std::function<void(const std::string&)>& progress) {
  if (dataset.manifest.conditional() != s.config.model.conditional())
    throw std::invalid_argument("dataset and model disagree on conditioning");
  fs::create_directories(paths.grid_dir());
  fs::create_directories(paths.checkpoint_dir());

  data::BatchIterator batches(dataset, s.config.batch_size, Rng::derived(s.config.seed, 6).next_u64());
  if (s.data_position != data::IteratorPosition{}) batches.seek(s.data_position);
  write_loss_log(paths.loss_log(), s.history);

  auto checkpoint = [&] {
    save_checkpoint(s, paths.checkpoint_dir() / numbered("ckpt_", s.iteration, ".ckpt"));
    save_checkpoint(s, paths.latest_checkpoint());
  };

  while (s.iteration < s.config.total_iterations) {
    const data::Batch batch = batches.next();
    const std::size_t logged = s.history.size();
    train_step(s, batch);
    s.data_position = batches.position();
    if (s.history.size() > logged) {
      std::ofstream log(paths.loss_log(), std::ios::app);
      const auto& h = s.history.back();
      log << std::setprecision(9) << h.iteration << '\t' << h.d_loss << '\t' << h.g_loss << '\n';
      if (progress) {
        std::ostringstream msg;
        msg << "iteration " << h.iteration << " d_loss " << h.d_loss << " g_loss " << h.g_loss;
        progress(msg.str());
      }
    }
    if (s.iteration % s.config.sample_every == 0)
      img::write_png(paths.grid_dir() / numbered("grid_", s.iteration, ".png"), sample_grid(s));
    if (s.iteration % s.config.checkpoint_every == 0) checkpoint();
  }
  if (s.iteration % s.config.checkpoint_every != 0 || !fs::exists(paths.latest_checkpoint())) checkpoint();
}

}  // namespace sngan::train
