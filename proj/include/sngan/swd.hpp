#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sngan/tensor.hpp"

namespace sngan::swd {

using nn::Tensor;

/// 5-tap binomial blur [1 4 6 4 1] / 16 per axis, mirrored borders. [C, H, W].
Tensor blur(const Tensor& image, float gain = 1.0f);
/// Blur, then keep every second pixel.
Tensor downsample(const Tensor& image);
/// Zero-insert to 2× the size, then blur with gain 4.
Tensor upsample(const Tensor& image);

/// `levels` bands: level i = g_i − upsample(g_{i+1}) for all but the last,
/// which is the low-pass residual g_{levels−1}. Side must be a power of two
/// and the coarsest level at least 16 pixels.
std::vector<Tensor> laplacian_pyramid(const Tensor& image, std::size_t levels);
/// Inverse of laplacian_pyramid.
Tensor reconstruct(const std::vector<Tensor>& pyramid);
/// Levels from `resolution` down to 16 (e.g. 128 -> 4).
std::size_t level_count(std::size_t resolution);

/// Row-major [count, dim] patch descriptors.
struct DescriptorSet {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> data;
};

/// Top-left patch corners, drawn with a stream derived from `seed`.
std::vector<std::pair<std::size_t, std::size_t>> patch_positions(std::size_t n_images,
                                                                  std::size_t patches_per_image,
                                                                  std::size_t side,
                                                                  std::size_t patch_size,
                                                                  std::uint64_t seed);

/// patches_per_image patch_size² × C patches per image, then each channel of
/// the whole set normalized to zero mean and unit variance (division skipped
/// for a constant channel). Descriptor layout is channel-major.
DescriptorSet descriptors(const std::vector<Tensor>& level_images, std::size_t patches_per_image,
                          std::size_t patch_size, std::uint64_t seed);

/// Mean over directions of the mean |a_(i) − b_(i)| between sorted
/// projections. Directions need not be normalized by the caller.
double sliced_wasserstein(const DescriptorSet& a, const DescriptorSet& b,
                          const std::vector<std::vector<double>>& directions);
/// Same with n_projections random unit directions from `seed`.
double sliced_wasserstein(const DescriptorSet& a, const DescriptorSet& b,
                          std::size_t n_projections, std::uint64_t seed);

struct SwdConfig {
  std::size_t patch_size = 7;
  std::size_t patches_per_image = 128;
  std::size_t n_projections = 128;  // per repeat
  std::size_t repeats = 4;
};

struct SwdReport {
  std::map<std::size_t, double> per_level;  // resolution -> distance ×10³
  double average = 0.0;                     // ×10³
  std::size_t n_images = 0;
  std::uint64_t seed = 0;
  SwdConfig config;
  std::vector<std::size_t> real_subset;  // indices into the sorted real listing
  std::vector<std::size_t> fake_subset;

  std::string to_text() const;
  std::string to_json() const;
};

/// Distances between two equally sized sets of [C, R, R] images.
SwdReport evaluate_sets(const std::vector<Tensor>& real, const std::vector<Tensor>& fake,
                        std::uint64_t seed, const SwdConfig& config = {});

/// Sorted PNG paths under `dir` (recursive).
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);
/// Seeded choice of n distinct indices out of `available`, in draw order.
std::vector<std::size_t> choose_subset(std::size_t available, std::size_t n, std::uint64_t seed);
/// Preprocessed images for a subset of a listing.
std::vector<Tensor> load_images(const std::vector<std::filesystem::path>& paths,
                                const std::vector<std::size_t>& subset, std::size_t resolution,
                                std::size_t channels);

/// Samples n images per side (same seeded choice on each side) and compares.
SwdReport evaluate(const std::filesystem::path& real_dir, const std::filesystem::path& fake_dir,
                   std::size_t n_images, std::size_t resolution, std::uint64_t seed,
                   const SwdConfig& config = {});
/// Real directory against already generated images.
SwdReport evaluate(const std::filesystem::path& real_dir, const std::vector<Tensor>& fake,
                   std::uint64_t seed, const SwdConfig& config = {});

}  // namespace sngan::swd
