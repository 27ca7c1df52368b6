#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sngan/conditioning.hpp"
#include "sngan/image_io.hpp"
#include "sngan/rng.hpp"
#include "sngan/tensor.hpp"

namespace sngan::data {

using nn::Tensor;

/// [0, 255] -> [−1, 1] and back (rounded, clamped).
inline float scale_pixel(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }
std::uint8_t unscale_pixel(float x);

/// Center-crop to the shorter side, bilinear resize (half-pixel centers) to
/// resolution², scale to [−1, 1]. Returns [channels, res, res]; gray input is
/// replicated to 3 channels, RGB reduced to luma for 1 channel.
Tensor preprocess(const img::Image& image, std::size_t resolution, std::size_t channels = 3);

/// [C, H, W] in [−1, 1] -> 8-bit image.
img::Image to_image(const Tensor& chw);
/// [N, C, R, R] tiled row-major into a rows × cols grid (rows = ⌈N / cols⌉).
img::Image tile_grid(const Tensor& batch, std::size_t cols);

/// Horizontal mirror of a [C, H, W] tensor.
Tensor flip_horizontal(const Tensor& chw);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory unless absolute
  std::optional<cond::ConditionVector> y;
};

/// Text format, UTF-8, one record per line:
///   #resolution=32        directives (also flip_double, channels, schema, encoding)
///   path<TAB>attr1<TAB>…  header; attribute columns absent when unconditional
///   img/0.png<TAB>1<TAB>0 records with 0/1 values
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::size_t resolution = 32;
  std::size_t channels = 3;
  bool flip_double = false;
  std::optional<cond::ConditionSchema> schema;
  std::filesystem::path base_dir;

  std::size_t effective_size() const { return records.size() * (flip_double ? 2 : 1); }
  bool conditional() const { return schema.has_value(); }
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct IngestIssue {
  std::string path;
  std::string message;
};

struct IngestReport {
  std::size_t loaded = 0;
  std::vector<IngestIssue> failed;
  std::size_t effective_size = 0;

  /// Line-delimited: one "error<TAB>path<TAB>message" per failure, then a
  /// "loaded=… failed=… effective=…" summary line.
  std::string to_text() const;
};

/// Decoded, preprocessed records. Undecodable records are skipped and listed
/// in the report.
struct Dataset {
  DatasetManifest manifest;
  std::vector<Tensor> images;  // [C, R, R]
  std::vector<cond::ConditionVector> conditions;
  IngestReport report;

  std::size_t size() const { return images.size() * (manifest.flip_double ? 2 : 1); }
  std::size_t y_dim() const { return manifest.schema ? manifest.schema->dim() : 0; }
};

Dataset load_dataset(const DatasetManifest& manifest);

struct Batch {
  Tensor images;                     // [b, C, R, R]
  std::optional<Tensor> conditions;  // [b, y_dim]
};

/// Position of an iterator, persisted in checkpoints.
struct IteratorPosition {
  std::uint64_t epoch = 0;
  std::size_t cursor = 0;
  friend bool operator==(const IteratorPosition&, const IteratorPosition&) = default;
};

/// Seeded epoch-wise batching over (record, flip) items. Each epoch is a
/// permutation of all items keyed by (seed, epoch); the last batch of an
/// epoch may be short.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

  Batch next();
  std::size_t batches_per_epoch() const;
  IteratorPosition position() const { return {epoch_, cursor_}; }
  void seek(IteratorPosition position);

  /// Item order of an epoch: item k is record k / 2 (flipped when odd) with
  /// flip doubling, record k otherwise.
  std::vector<std::size_t> epoch_order(std::uint64_t epoch) const;

 private:
  const Dataset* dataset_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

enum class SynthKind { two_class_shapes, gradient_vs_solid, digit_glyphs };
std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& s);

/// One synthetic image of class `label`.
img::Image synth_image(SynthKind kind, std::size_t label, std::size_t resolution, Rng& rng);

/// Writes n labeled PNGs (label = i mod classes) under `dir/images` plus
/// `dir/manifest.tsv`, and returns the manifest.
DatasetManifest synth_dataset(SynthKind kind, std::size_t n, std::size_t resolution,
                              std::uint64_t seed, const std::filesystem::path& dir,
                              bool flip_double = false);

}  // namespace sngan::data
