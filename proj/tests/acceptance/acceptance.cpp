// End-to-end acceptance checks. Run one criterion by name or "all"; each
// criterion prints a single PASS/FAIL line with its measured figures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "reference_critic.hpp"
#include "sngan/losses.hpp"
#include "sngan/ops.hpp"
#include "sngan/spectral_norm.hpp"
#include "sngan/swd.hpp"
#include "sngan/trainer.hpp"

using namespace sngan;
using nn::Mode;
using nn::Tensor;
using nn::Var;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }

  std::string line() const {
    std::string s = detail.str();
    for (const auto& f : failures) s += " [failed: " + f + "]";
    return s;
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path work_dir(const std::string& name) {
  const char* root = std::getenv("SNGAN_ACCEPTANCE_DIR");
  fs::path dir = fs::path(root ? root : "acceptance_runs") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void progress(const std::string& line) { std::cerr << line << '\n'; }

Tensor random_tensor(const nn::Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

// ------------------------------------------------------------------------

Outcome spectral_norm_criterion() {
  Outcome o;
  Stopwatch clock;
  Rng rng(20240101);
  double worst = 0.0;
  std::size_t cases = 0;
  auto check = [&](const Tensor& weight) {
    auto state = sn::make_state(weight, rng);
    const Tensor normalized = sn::normalize_converged(weight, state);
    worst = std::max(worst, std::abs(oracle::sigma_max(sn::reshape_weight(normalized)) - 1.0));
    ++cases;
  };
  for (int i = 0; i < 100; ++i) check(random_tensor({1 + rng.below(64), 1 + rng.below(64)}, rng));
  for (int i = 0; i < 20; ++i) {
    const std::size_t k = rng.bernoulli(0.5) ? 3 : 4;
    check(random_tensor({1 + rng.below(64), 1 + rng.below(16), k, k}, rng));
  }
  const double t = clock.seconds();
  o.detail << cases << " weights, max |sigma_svd - 1| = " << worst << ", " << t << " s";
  o.require(worst <= 1e-4, "sigma within 1e-4");
  o.require(t < 60.0, "runtime under 1 min");
  return o;
}

// Tiny conditional discriminator: spectral convs, a tiled condition and a
// spectral dense head.
nn::LayerStack tiny_discriminator(Rng& rng) {
  using nn::LayerSpec;
  return nn::LayerStack("D", {2, 6, 6},
                        {LayerSpec::conv(4, 3, 2, 1, true), LayerSpec::lrelu(0.1f), LayerSpec::tile_condition(),
                         LayerSpec::conv(3, 3, 1, 1, true), LayerSpec::lrelu(0.1f), LayerSpec::flatten(),
                         LayerSpec::concat_condition(), LayerSpec::dense(1, true)},
                        rng, 2);
}

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

std::vector<double> to_double(const Tensor& t, std::size_t begin, std::size_t count) {
  return {t.data().begin() + static_cast<std::ptrdiff_t>(begin),
          t.data().begin() + static_cast<std::ptrdiff_t>(begin + count)};
}

// Autograd gradients of the float implementation against double-precision
// central differences of an independent re-implementation of the critic.
Outcome gradient_checks_criterion() {
  Outcome o;
  Stopwatch clock;
  constexpr std::size_t kBatch = 3, kPer = 2 * 6 * 6;
  constexpr float kAlpha = 0.9f, kLambda = 10.0f;
  constexpr double kStep = 1e-6;
  double worst_plain = 0.0, worst_loss = 0.0, worst_gp = 0.0, worst_forward = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    auto d = tiny_discriminator(rng);
    // Move the parameters off their initial values, then let the power
    // iteration settle on the perturbed weights.
    for (auto& p : d.parameters())
      for (auto& v : p.var.leaf_value().data()) v += static_cast<float>(0.1 * rng.normal());
    const Tensor y_values = cond::to_tensor({{1, 0}, {0, 1}, {1, 1}}, 2);
    Rng fwd(seed + 1000);
    for (int i = 0; i < 10; ++i) d.forward(random_tensor({kBatch, 2, 6, 6}, rng), Mode::train, &fwd, &y_values);
    Var x(random_tensor({kBatch, 2, 6, 6}, rng), true);
    const Tensor x_fake = random_tensor({kBatch, 2, 6, 6}, rng);
    const Var y(y_values);
    const Tensor weights = random_tensor({kBatch, 1}, rng);

    std::vector<Var> params;
    for (const auto& p : d.parameters()) params.push_back(p.var);
    std::vector<Var> params_and_input = params;
    params_and_input.push_back(x);

    // Eval mode holds the spectral vectors fixed.
    const Var out = d.forward(x, Mode::eval, nullptr, y);
    const auto g_plain = nn::grad(nn::sum_all(nn::mul_const(out, weights)), params_and_input);
    const auto g_loss = nn::grad(
        loss::standard_d_loss_logits(d.forward(x, Mode::eval, nullptr, y),
                                     d.forward(Var(x_fake), Mode::eval, nullptr, y), kAlpha),
        params_and_input);
    const loss::Critic critic = [&](const Var& in) { return d.forward(in, Mode::eval, nullptr, y); };
    Rng eps_rng(seed);
    const auto g_gp = nn::grad(loss::gradient_penalty(critic, x.value(), x_fake, kLambda, eps_rng), params);

    // Reference side: same values, double arithmetic.
    oracle::ReferenceCritic ref(d);
    oracle::Params p = ref.initial_params();
    std::vector<std::vector<double>> xs, fakes, mixed, ys;
    Rng eps_ref(seed);
    for (std::size_t b = 0; b < kBatch; ++b) {
      xs.push_back(to_double(x.value(), b * kPer, kPer));
      fakes.push_back(to_double(x_fake, b * kPer, kPer));
      ys.push_back(to_double(y_values, b * 2, 2));
      const float eps = static_cast<float>(eps_ref.uniform());
      std::vector<double> m(kPer);
      for (std::size_t i = 0; i < kPer; ++i)
        m[i] = eps * x.value()[b * kPer + i] + (1.0f - eps) * x_fake[b * kPer + i];
      mixed.push_back(std::move(m));
    }
    for (std::size_t b = 0; b < kBatch; ++b) {
      const double r = ref.forward(p, xs[b], ys[b]);
      worst_forward = std::max(worst_forward, std::abs(r - out.value()[b]) / std::max(1.0, std::abs(r)));
    }

    const auto plain = [&] {
      double s = 0.0;
      for (std::size_t b = 0; b < kBatch; ++b) s += weights[b] * ref.forward(p, xs[b], ys[b]);
      return s;
    };
    const auto smoothed = [&] {
      double real = 0.0, fake = 0.0;
      for (std::size_t b = 0; b < kBatch; ++b) {
        const double r = ref.forward(p, xs[b], ys[b]), f = ref.forward(p, fakes[b], ys[b]);
        real += kAlpha * softplus(-r) + (1.0 - kAlpha) * softplus(r);
        fake += softplus(f);
      }
      return (real + fake) / kBatch;
    };
    const auto penalty = [&] {
      double s = 0.0;
      for (std::size_t b = 0; b < kBatch; ++b) {
        double sq = 0.0;
        for (double g : ref.input_gradient(p, mixed[b], ys[b])) sq += g * g;
        const double n = std::sqrt(sq + 1e-12) - 1.0;
        s += n * n;
      }
      return kLambda * s / kBatch;
    };

    // Worst per-leaf relative error; the last analytic entry is the input
    // when `with_input` is set.
    const auto compare = [&](const std::function<double()>& f, const std::vector<Var>& analytic, bool with_input) {
      double worst = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        std::vector<double> a(p[k].size()), n(p[k].size());
        for (std::size_t i = 0; i < p[k].size(); ++i) {
          a[i] = analytic[k].value()[i];
          n[i] = oracle::central_difference_d(f, p[k][i], kStep);
        }
        worst = std::max(worst, oracle::relative_error(a, n));
      }
      if (with_input) {
        std::vector<double> a, n;
        for (std::size_t b = 0; b < kBatch; ++b)
          for (std::size_t i = 0; i < kPer; ++i) {
            a.push_back(analytic.back().value()[b * kPer + i]);
            n.push_back(oracle::central_difference_d(f, xs[b][i], kStep));
          }
        worst = std::max(worst, oracle::relative_error(a, n));
      }
      return worst;
    };
    worst_plain = std::max(worst_plain, compare(plain, g_plain, true));
    worst_loss = std::max(worst_loss, compare(smoothed, g_loss, true));
    worst_gp = std::max(worst_gp, compare(penalty, g_gp, false));
  }
  const double t = clock.seconds();
  o.detail << "50 seeds, max relative error: output " << worst_plain << ", smoothed loss " << worst_loss
           << ", penalty " << worst_gp << " (forward agreement " << worst_forward << "), " << t << " s";
  o.require(worst_plain < 1e-3 && worst_loss < 1e-3 && worst_gp < 1e-3, "relative error below 1e-3");
  o.require(t < 120.0, "runtime under 2 min");
  return o;
}

Outcome loss_identities_criterion() {
  Outcome o;
  const double chance = loss::standard_d_loss(Var(Tensor({1, 1}, 0.5f)), Var(Tensor({1, 1}, 0.5f)), 1.0f).value().item();
  const double chance_err = std::abs(chance - 2.0 * std::log(2.0));

  Rng rng(5);
  double w_err = 0.0, gp_max = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor fr = random_tensor({16, 1}, rng), ff = random_tensor({16, 1}, rng);
    const auto w = loss::wasserstein_losses(Var(fr), Var(ff));
    double mean_r = 0.0;
    for (float v : fr.data()) mean_r += v;
    mean_r /= 16.0;
    w_err = std::max(w_err, std::abs(w.d_loss.value().item() + w.g_loss.value().item() + mean_r));

    Tensor slope = random_tensor({8, 1}, rng);
    double norm = 0.0;
    for (float v : slope.data()) norm += static_cast<double>(v) * v;
    for (auto& v : slope.data()) v = static_cast<float>(v / std::sqrt(norm));
    const Var sv(slope);
    const loss::Critic linear = [&](const Var& in) { return nn::matmul(in, sv); };
    const float gp = loss::gradient_penalty(linear, random_tensor({16, 8}, rng), random_tensor({16, 8}, rng), 10.0f, rng)
                         .value()
                         .item();
    gp_max = std::max(gp_max, static_cast<double>(std::abs(gp)));
  }
  o.detail << "|d(0.5,0.5) - 2 log 2| = " << chance_err << ", max |d + g + mean f_real| = " << w_err
           << ", max |penalty| (unit linear critic) = " << gp_max;
  o.require(chance_err <= 1e-6, "chance loss");
  o.require(w_err <= 1e-6, "wasserstein identity");
  o.require(gp_max <= 1e-6, "zero penalty");
  return o;
}

Outcome swd_oracle_criterion() {
  Outcome o;
  Stopwatch clock;
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(8), dim = 1 + rng.below(16);
    swd::DescriptorSet a{n, dim, std::vector<float>(n * dim)}, b{n, dim, std::vector<float>(n * dim)};
    for (auto& v : a.data) v = static_cast<float>(rng.normal());
    for (auto& v : b.data) v = static_cast<float>(rng.normal());
    std::vector<double> dir(dim);
    double norm = 0.0;
    for (auto& v : dir) v = rng.normal(), norm += v * v;
    for (auto& v : dir) v /= std::sqrt(norm);
    std::vector<double> pa(n, 0.0), pb(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < dim; ++k) pa[i] += a.data[i * dim + k] * dir[k], pb[i] += b.data[i * dim + k] * dir[k];
    worst = std::max(worst, std::abs(swd::sliced_wasserstein(a, b, {dir}) - oracle::brute_force_transport(pa, pb)));
  }
  o.require(worst <= 1e-9, "single projection equals brute-force transport");

  std::vector<Tensor> real;
  Rng synth(3);
  for (std::size_t i = 0; i < 64; ++i)
    real.push_back(
        data::preprocess(data::synth_image(data::SynthKind::two_class_shapes, i % 2, 64, synth), 64, 3));
  const auto same = swd::evaluate_sets(real, real, 1);
  bool zeros = same.average == 0.0;
  for (const auto& [res, d] : same.per_level) zeros = zeros && d == 0.0;
  o.require(zeros, "identical sets give zeros");

  std::vector<double> sweep;
  for (float sigma : {0.05f, 0.1f, 0.2f}) {
    Rng noise(11);
    auto fake = real;
    for (auto& im : fake)
      for (auto& v : im.data()) v += sigma * static_cast<float>(noise.normal());
    sweep.push_back(swd::evaluate_sets(real, fake, 1).average);
  }
  o.require(sweep[0] < sweep[1] && sweep[1] < sweep[2], "noise sweep strictly increasing");
  const double t = clock.seconds();
  o.require(t < 120.0, "runtime under 2 min");
  o.detail << "max |sliced - brute force| = " << worst << ", identical-set average " << same.average
           << ", noise sweep " << sweep[0] << " < " << sweep[1] << " < " << sweep[2] << ", " << t << " s";
  return o;
}

// Runs the trainer on a prepared dataset; returns the final state.
train::TrainState train_run(const train::TrainConfig& config, const data::Dataset& dataset,
                            const fs::path& out_dir, bool verbose = true) {
  auto state = train::init_state(config, dataset.manifest.schema);
  train::run(state, dataset, train::RunPaths{out_dir}, verbose ? std::function<void(const std::string&)>(progress) : std::function<void(const std::string&)>{});
  return state;
}

// Generated images for `per_class` samples of each class of a one-hot schema.
std::vector<std::pair<Tensor, std::size_t>> class_samples(train::TrainState& state, std::size_t per_class,
                                                          std::uint64_t seed) {
  const std::size_t classes = state.schema->dim();
  std::vector<std::pair<Tensor, std::size_t>> out;
  Rng rng(seed);
  for (std::size_t k = 0; k < classes; ++k) {
    cond::ConditionVector y(classes, 0.0f);
    y[k] = 1.0f;
    const Tensor ys = cond::to_tensor(std::vector<cond::ConditionVector>(per_class, y), classes);
    const Tensor images = train::generate(state.pair, arch::sample_z(per_class, state.config.model.z_dim, rng), &ys);
    for (std::size_t i = 0; i < per_class; ++i) out.emplace_back(oracle::sample_at(images, i), k);
  }
  return out;
}

Outcome vanilla_conditional_criterion() {
  Outcome o;
  Stopwatch clock;
  const fs::path dir = work_dir("vanilla_conditional");
  const auto manifest = data::synth_dataset(data::SynthKind::digit_glyphs, 6000, 28, 1, dir / "data");
  const data::Dataset dataset = data::load_dataset(manifest);

  // Oracle: class templates from the first 5000 images, validated on the rest.
  std::vector<Tensor> fit;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 5000; ++i) fit.push_back(dataset.images[i]), labels.push_back(i % 10);
  const oracle::TemplateClassifier clf(fit, labels, 10);
  std::size_t held_out_correct = 0;
  for (std::size_t i = 5000; i < 6000; ++i) held_out_correct += clf.classify(dataset.images[i]) == i % 10;
  const double oracle_accuracy = held_out_correct / 1000.0;
  o.require(oracle_accuracy >= 0.95, "oracle accuracy on real glyphs");

  train::TrainConfig config = train::default_config(arch::Variant::vanilla_mlp);
  config.model.y_dim = 10;
  config.model.wiring = arch::Wiring::input_concat;
  config.adam_d.learning_rate = config.adam_g.learning_rate = 2e-3f;
  config.batch_size = 128;
  config.total_iterations = 5000;
  config.log_every = 50;
  config.sample_every = 1000;
  config.checkpoint_every = 5000;
  config.seed = 7;
  auto state = train_run(config, dataset, dir / "run");

  std::size_t late = 0, inside = 0;
  for (const auto& r : state.history) {
    if (r.iteration <= 1000) continue;
    ++late;
    inside += r.d_loss >= 0.3 && r.d_loss <= 3.0 && r.g_loss >= 0.3 && r.g_loss <= 3.0;
  }
  const double in_band = late ? static_cast<double>(inside) / late : 0.0;
  o.require(in_band >= 0.8, "losses in [0.3, 3.0] for 80% of logged points");

  const auto samples = class_samples(state, 20, 99);
  std::size_t correct = 0;
  for (const auto& [image, k] : samples) correct += clf.classify(image) == k;
  const double control = static_cast<double>(correct) / samples.size();
  o.require(samples.size() == 200 && control >= 0.9, "requested class on 90% of 200 samples");
  o.detail << "oracle held-out accuracy " << oracle_accuracy << ", losses in band " << inside << "/" << late << " ("
           << in_band << "), class control " << correct << "/" << samples.size() << " (" << control << "), "
           << clock.seconds() << " s";
  return o;
}

Outcome conditional_control_32px_criterion() {
  Outcome o;
  Stopwatch clock;
  const fs::path dir = work_dir("conditional_control_32px");
  const auto manifest = data::synth_dataset(data::SynthKind::two_class_shapes, 2000, 32, 2, dir / "data");
  const data::Dataset dataset = data::load_dataset(manifest);

  std::size_t real_correct = 0;
  for (std::size_t i = 0; i < dataset.images.size(); ++i)
    real_correct += oracle::classify_shape(dataset.images[i]) == i % 2;
  const double oracle_accuracy = static_cast<double>(real_correct) / dataset.images.size();
  o.require(oracle_accuracy >= 0.98, "oracle accuracy on real shapes");

  train::TrainConfig config = train::default_config(arch::Variant::sn);
  config.model.y_dim = 2;
  config.model.wiring = arch::Wiring::tile_conv1_dense;
  config.model.width = 0.25;
  config.batch_size = 32;
  config.total_iterations = 10000;
  config.log_every = 100;
  config.sample_every = 1000;
  config.checkpoint_every = 2000;
  config.seed = 3;
  auto state = train_run(config, dataset, dir / "run");

  const auto samples = class_samples(state, 64, 1234);
  std::size_t correct = 0;
  for (const auto& [image, k] : samples) correct += oracle::classify_shape(image) == k;
  const double control = static_cast<double>(correct) / samples.size();
  o.require(samples.size() == 128 && control >= 0.85, "requested shape on 85% of 128 samples");

  // The grid's condition rows: first half circle, second half square, exactly
  // the vectors grid_conditions draws for the run.
  const auto expected = cond::grid_conditions(*state.schema, "circle", train::kGridCount, Rng::derived(config.seed, 5).next_u64());
  const Tensor& grid = *state.grid_conditions;
  bool halves = true;
  for (std::size_t i = 0; i < train::kGridCount; ++i) {
    halves = halves && grid[i * 2] == (i < train::kGridCount / 2 ? 1.0f : 0.0f);
    halves = halves && grid[i * 2] == expected[i][0] && grid[i * 2 + 1] == expected[i][1];
  }
  o.require(halves, "grid halves follow grid_conditions");
  const Tensor grid_images = train::generate(state.pair, state.z_bank, &grid);
  std::size_t grid_agree = 0;
  for (std::size_t i = 0; i < train::kGridCount; ++i)
    grid_agree += oracle::classify_shape(oracle::sample_at(grid_images, i)) == (i < train::kGridCount / 2 ? 0u : 1u);
  o.detail << "oracle real accuracy " << oracle_accuracy << ", class control " << correct << "/" << samples.size()
           << " (" << control << "), grid halves exact " << (halves ? "yes" : "no") << ", grid agreement "
           << grid_agree << "/64, " << clock.seconds() << " s";
  return o;
}

Outcome stabilizers_criterion() {
  Outcome o;
  Stopwatch clock;
  const fs::path dir = work_dir("stabilizers");
  const auto manifest = data::synth_dataset(data::SynthKind::two_class_shapes, 64, 32, 4, dir / "data");
  const data::Dataset dataset = data::load_dataset(manifest);

  train::TrainConfig config = train::default_config(arch::Variant::sn);
  config.model.y_dim = 2;
  config.model.wiring = arch::Wiring::tile_conv1_dense;
  config.model.width = 0.25;
  config.batch_size = 32;
  config.total_iterations = 2000;
  config.log_every = 10;
  config.sample_every = 500;
  config.checkpoint_every = 2000;
  config.seed = 9;

  auto stabilized_config = config;
  stabilized_config.model.stabilizers = {0.5f, 0.5f, 0.9f};
  const auto stabilized = train_run(stabilized_config, dataset, dir / "stabilized");
  double floor = INFINITY;
  for (const auto& r : stabilized.history) floor = std::min(floor, r.d_loss);
  o.require(stabilized.history.size() == 200, "200 logged points");
  o.require(floor > 0.05, "stabilized d_loss above 0.05 at every logged point");

  // Control without stabilizers; reported, not asserted.
  const auto control = train_run(config, dataset, dir / "control");
  double control_floor = INFINITY;
  for (const auto& r : control.history) control_floor = std::min(control_floor, r.d_loss);
  o.detail << "stabilized min d_loss " << floor << " over " << stabilized.history.size()
           << " points, control min d_loss " << control_floor << ", " << clock.seconds() << " s";
  return o;
}

Outcome determinism_criterion() {
  Outcome o;
  Stopwatch clock;
  const fs::path dir = work_dir("determinism");
  const auto manifest = data::synth_dataset(data::SynthKind::two_class_shapes, 64, 32, 5, dir / "data");
  const data::Dataset dataset = data::load_dataset(manifest);

  train::TrainConfig config = train::default_config(arch::Variant::sn);
  config.model.y_dim = 2;
  config.model.wiring = arch::Wiring::tile_conv1_dense;
  config.model.width = 0.125;
  config.batch_size = 16;
  config.total_iterations = 200;
  config.log_every = 1;
  config.sample_every = 100;
  config.checkpoint_every = 100;
  config.seed = 21;

  const auto a = train_run(config, dataset, dir / "a", false);
  const auto b = train_run(config, dataset, dir / "b", false);
  const bool repeat = a.history == b.history && a.history.size() == 200 &&
                      train::model_bytes(a.pair.generator) == train::model_bytes(b.pair.generator);
  o.require(repeat, "repeated run bit-identical");

  auto half = config;
  half.total_iterations = 100;
  train_run(half, dataset, dir / "c", false);
  auto resumed = train::load_checkpoint(train::RunPaths{dir / "c"}.latest_checkpoint(), &config.model);
  resumed.config.total_iterations = 200;
  train::run(resumed, dataset, train::RunPaths{dir / "c"});
  const bool resume = resumed.history == a.history &&
                      train::model_bytes(resumed.pair.discriminator) == train::model_bytes(a.pair.discriminator);
  o.require(resume, "resumed run matches the uninterrupted trace");
  std::size_t first_diff = a.history.size();
  for (std::size_t i = 0; i < std::min(a.history.size(), resumed.history.size()); ++i)
    if (!(a.history[i] == resumed.history[i])) {
      first_diff = i;
      break;
    }
  o.detail << "200-iteration trace repeat " << (repeat ? "identical" : "differs") << ", resume at 100 "
           << (resume ? "identical" : "differs from index " + std::to_string(first_diff)) << ", " << clock.seconds()
           << " s";
  return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list = {
      {"spectral_norm", spectral_norm_criterion},
      {"gradient_checks", gradient_checks_criterion},
      {"loss_identities", loss_identities_criterion},
      {"swd_oracle", swd_oracle_criterion},
      {"vanilla_conditional", vanilla_conditional_criterion},
      {"conditional_control_32px", conditional_control_32px_criterion},
      {"stabilizers", stabilizers_criterion},
      {"determinism", determinism_criterion},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  bool found = false, all_pass = true;
  for (const auto& [name, fn] : criteria()) {
    if (which != "all" && which != name) continue;
    found = true;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.line() << std::endl;
    all_pass = all_pass && o.pass;
  }
  if (!found) {
    std::cerr << "unknown criterion " << which << "; choose one of:";
    for (const auto& [name, fn] : criteria()) std::cerr << ' ' << name;
    std::cerr << " all\n";
    return 2;
  }
  return all_pass ? 0 : 1;
}
