#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sngan/adam.hpp"
#include "sngan/architectures.hpp"
#include "sngan/conditioning.hpp"
#include "sngan/data.hpp"
#include "sngan/losses.hpp"

namespace sngan::train {

using nn::Tensor;

struct TrainConfig {
  arch::ModelSpec model;
  loss::Objective objective = loss::Objective::standard;
  float lambda_gp = 0.0f;
  nn::AdamParams adam_d;
  nn::AdamParams adam_g;
  std::size_t batch_size = 64;
  std::size_t total_iterations = 100000;
  std::size_t d_steps_per_g_step = 1;
  std::size_t log_every = 100;
  std::size_t sample_every = 1000;
  std::size_t checkpoint_every = 10000;
  std::uint64_t seed = 0;
  /// Attribute whose 50-50 split drives conditional sample grids; empty
  /// selects the schema's first attribute.
  std::string grid_split;

  /// Objective and stabilizers as one record.
  loss::LossConfig loss() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Per-variant defaults: sngp uses Adam(5e-5, 0, 0.9) with the wasserstein
/// objective and λ = 1; every other variant Adam(2e-4, 0.5, 0.999) with the
/// standard objective.
TrainConfig default_config(arch::Variant variant);

struct LossRecord {
  std::uint64_t iteration = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct StepLosses {
  double d_loss = 0.0;   // includes the penalty when configured
  double g_loss = 0.0;
  double penalty = 0.0;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kGridSide = 8;
inline constexpr std::size_t kGridCount = kGridSide * kGridSide;

struct TrainState {
  TrainConfig config;
  std::optional<cond::ConditionSchema> schema;
  arch::GanPair pair;
  nn::AdamState opt_d;
  nn::AdamState opt_g;
  Rng rng;
  std::uint64_t iteration = 0;
  std::vector<LossRecord> history;  // append-only
  Tensor z_bank;                    // [64, z_dim], fixed per run
  std::optional<Tensor> grid_conditions;  // [64, y_dim]
  data::IteratorPosition data_position;
  std::string config_echo;          // stored verbatim in checkpoints
};

/// Fresh state: models built from config.seed, fixed z bank and grid
/// conditions. A conditional model needs a schema of width y_dim.
TrainState init_state(const TrainConfig& config, std::optional<cond::ConditionSchema> schema);

/// One iteration: d_steps_per_g_step discriminator updates on `batch` (fresh
/// z each, fake conditions reused from the batch), then one generator update.
/// Appends to the history when the new iteration is a multiple of log_every.
StepLosses train_step(TrainState& state, const data::Batch& batch);

/// Eval-mode generator output for z [n, z_dim] and, when conditional, y [n, y_dim].
Tensor generate(arch::GanPair& pair, const Tensor& z, const Tensor* y);

/// 8×8 grid of the fixed z bank under `conditions` (default: the state's
/// grid conditions).
img::Image sample_grid(TrainState& state, const Tensor* conditions = nullptr);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// Throws CheckpointError on a bad magic, version, checksum or layout, and
/// when `expected` is given and its model spec differs from the stored one.
TrainState load_checkpoint(const std::filesystem::path& path, const arch::ModelSpec* expected = nullptr);

/// Byte image of every parameter, buffer and spectral state of a stack.
std::string model_bytes(const nn::LayerStack& stack);

struct RunPaths {
  std::filesystem::path out_dir;
  std::filesystem::path loss_log() const { return out_dir / "loss_log.tsv"; }
  std::filesystem::path grid_dir() const { return out_dir / "grids"; }
  std::filesystem::path checkpoint_dir() const { return out_dir / "checkpoints"; }
  std::filesystem::path latest_checkpoint() const { return checkpoint_dir() / "latest.ckpt"; }
};

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_log(const std::filesystem::path& path);

/// Trains until config.total_iterations, writing the loss log, grids every
/// sample_every and checkpoints every checkpoint_every (plus one at the end).
void run(TrainState& state, const data::Dataset& dataset, const RunPaths& paths,
         const std::function<void(const std::string&)>& progress = {});

}  // namespace sngan::train
