#include "sngan/swd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <sstream>
#include <stdexcept>

#include "sngan/data.hpp"
#include "sngan/rng.hpp"

namespace sngan::swd {

namespace fs = std::filesystem;
using nn::Shape;

namespace {

constexpr float kTaps[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
constexpr std::size_t kMinLevel = 16;
constexpr double kReportScale = 1e3;

std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto m = static_cast<std::ptrdiff_t>(n);
  while (i < 0 || i >= m) i = i < 0 ? -i : 2 * (m - 1) - i;
  return static_cast<std::size_t>(i);
}

void check_image(const Tensor& t) {
  if (t.rank() != 3) throw nn::ShapeError("expected a [C, H, W] image, got " + nn::to_string(t.shape()));
}

bool power_of_two(std::size_t n) { return n && (n & (n - 1)) == 0; }

}  // namespace

Tensor blur(const Tensor& image, float gain) {
  check_image(image);
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const float g = std::sqrt(gain);
  Tensor tmp(image.shape()), out(image.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        float s = 0.0f;
        for (int t = -2; t <= 2; ++t)
          s += kTaps[t + 2] * image[(k * h + y) * w + mirror(static_cast<std::ptrdiff_t>(x) + t, w)];
        tmp[(k * h + y) * w + x] = s * g;
      }
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        float s = 0.0f;
        for (int t = -2; t <= 2; ++t)
          s += kTaps[t + 2] * tmp[(k * h + mirror(static_cast<std::ptrdiff_t>(y) + t, h)) * w + x];
        out[(k * h + y) * w + x] = s * g;
      }
  return out;
}

Tensor downsample(const Tensor& image) {
  const Tensor b = blur(image);
  const std::size_t c = b.dim(0), h = b.dim(1), w = b.dim(2);
  if (h % 2 || w % 2) throw nn::ShapeError("downsample needs even sides");
  Tensor out({c, h / 2, w / 2});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t x = 0; x < w / 2; ++x) out[(k * h / 2 + y) * (w / 2) + x] = b[(k * h + 2 * y) * w + 2 * x];
  return out;
}

Tensor upsample(const Tensor& image) {
  check_image(image);
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor z({c, 2 * h, 2 * w}, 0.0f);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) z[(k * 2 * h + 2 * y) * 2 * w + 2 * x] = image[(k * h + y) * w + x];
  return blur(z, 4.0f);
}

std::size_t level_count(std::size_t resolution) {
  if (!power_of_two(resolution) || resolution < kMinLevel)
    throw std::invalid_argument("pyramid side must be a power of two >= 16, got " + std::to_string(resolution));
  std::size_t n = 1;
  for (std::size_t r = resolution; r > kMinLevel; r /= 2) ++n;
  return n;
}

std::vector<Tensor> laplacian_pyramid(const Tensor& image, std::size_t levels) {
  check_image(image);
  const std::size_t side = image.dim(1);
  if (image.dim(2) != side) throw nn::ShapeError("pyramid needs a square image");
  if (levels == 0 || levels > level_count(side))
    throw std::invalid_argument("pyramid of side " + std::to_string(side) + " supports 1.." +
                                std::to_string(level_count(side)) + " levels");
  std::vector<Tensor> gauss{image};
  for (std::size_t i = 1; i < levels; ++i) gauss.push_back(downsample(gauss.back()));
  std::vector<Tensor> out;
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    const Tensor up = upsample(gauss[i + 1]);
    Tensor band = gauss[i];
    for (std::size_t k = 0; k < band.size(); ++k) band[k] -= up[k];
    out.push_back(std::move(band));
  }
  out.push_back(gauss.back());
  return out;
}

Tensor reconstruct(const std::vector<Tensor>& pyramid) {
  if (pyramid.empty()) throw std::invalid_argument("empty pyramid");
  Tensor img = pyramid.back();
  for (std::size_t i = pyramid.size() - 1; i-- > 0;) {
    Tensor up = upsample(img);
    if (up.shape() != pyramid[i].shape()) throw nn::ShapeError("pyramid levels do not nest");
    for (std::size_t k = 0; k < up.size(); ++k) up[k] += pyramid[i][k];
    img = std::move(up);
  }
  return img;
}

std::vector<std::pair<std::size_t, std::size_t>> patch_positions(std::size_t n_images,
                                                                  std::size_t patches_per_image,
                                                                  std::size_t side, std::size_t patch_size,
                                                                  std::uint64_t seed) {
  if (patch_size == 0 || patch_size > side)
    throw std::invalid_argument("patch size " + std::to_string(patch_size) + " does not fit side " +
                                std::to_string(side));
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> out(n_images * patches_per_image);
  const std::size_t range = side - patch_size + 1;
  for (auto& p : out) {
    p.first = rng.below(range);
    p.second = rng.below(range);
  }
  return out;
}

DescriptorSet descriptors(const std::vector<Tensor>& level_images, std::size_t patches_per_image,
                          std::size_t patch_size, std::uint64_t seed) {
  if (level_images.empty()) throw std::invalid_argument("descriptors: no images");
  const Shape shape = level_images.front().shape();
  check_image(level_images.front());
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  if (h != w) throw nn::ShapeError("descriptors: square images expected");
  for (const auto& im : level_images)
    if (im.shape() != shape) throw nn::ShapeError("descriptors: images differ in shape");

  const auto pos = patch_positions(level_images.size(), patches_per_image, h, patch_size, seed);
  DescriptorSet set;
  set.count = pos.size();
  set.dim = c * patch_size * patch_size;
  set.data.resize(set.count * set.dim);
  for (std::size_t i = 0; i < set.count; ++i) {
    const Tensor& im = level_images[i / patches_per_image];
    const auto [py, px] = pos[i];
    float* d = set.data.data() + i * set.dim;
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          *d++ = im[(k * h + py + y) * w + px + x];
  }

  const std::size_t per = patch_size * patch_size;
  for (std::size_t k = 0; k < c; ++k) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < set.count; ++i)
      for (std::size_t j = 0; j < per; ++j) {
        const double v = set.data[i * set.dim + k * per + j];
        sum += v;
        sq += v * v;
      }
    const double n = static_cast<double>(set.count * per);
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    const double sd = std::sqrt(var);
    const bool degenerate = sd < 1e-8;
    for (std::size_t i = 0; i < set.count; ++i)
      for (std::size_t j = 0; j < per; ++j) {
        float& v = set.data[i * set.dim + k * per + j];
        v = static_cast<float>(degenerate ? v - mean : (v - mean) / sd);
      }
  }
  return set;
}

double sliced_wasserstein(const DescriptorSet& a, const DescriptorSet& b,
                          const std::vector<std::vector<double>>& directions) {
  if (a.dim != b.dim)
    throw std::invalid_argument("descriptor dimensions differ: " + std::to_string(a.dim) + " vs " +
                                std::to_string(b.dim));
  if (a.count != b.count)
    throw std::invalid_argument("descriptor counts differ: " + std::to_string(a.count) + " vs " +
                                std::to_string(b.count) + "; subsample the larger set first");
  if (a.count == 0 || directions.empty()) throw std::invalid_argument("sliced_wasserstein: empty input");

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXd dirs(a.dim, directions.size());
  for (std::size_t p = 0; p < directions.size(); ++p) {
    if (directions[p].size() != a.dim) throw std::invalid_argument("direction has the wrong length");
    double n = 0.0;
    for (double v : directions[p]) n += v * v;
    n = std::sqrt(n);
    if (n == 0.0) throw std::invalid_argument("zero projection direction");
    for (std::size_t j = 0; j < a.dim; ++j) dirs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)) = directions[p][j] / n;
  }
  const auto rows = static_cast<Eigen::Index>(a.count), cols = static_cast<Eigen::Index>(a.dim);
  const RowMat ma = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                        a.data.data(), rows, cols).cast<double>();
  const RowMat mb = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                        b.data.data(), rows, cols).cast<double>();
  const Eigen::MatrixXd pa = ma * dirs, pb = mb * dirs;

  double total = 0.0;
  std::vector<double> va(a.count), vb(a.count);
  for (Eigen::Index p = 0; p < pa.cols(); ++p) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      va[static_cast<std::size_t>(i)] = pa(i, p);
      vb[static_cast<std::size_t>(i)] = pb(i, p);
    }
    std::sort(va.begin(), va.end());
    std::sort(vb.begin(), vb.end());
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += std::abs(va[i] - vb[i]);
    total += s / static_cast<double>(va.size());
  }
  return total / static_cast<double>(directions.size());
}

double sliced_wasserstein(const DescriptorSet& a, const DescriptorSet& b, std::size_t n_projections,
                          std::uint64_t seed) {
  if (n_projections == 0) throw std::invalid_argument("n_projections must be positive");
  Rng rng(seed);
  std::vector<std::vector<double>> dirs(n_projections, std::vector<double>(a.dim));
  for (auto& d : dirs)
    for (auto& v : d) v = rng.normal();
  return sliced_wasserstein(a, b, dirs);
}

std::string SwdReport::to_text() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  for (auto it = per_level.rbegin(); it != per_level.rend(); ++it)
    out << "level\t" << it->first << '\t' << it->second << '\n';
  out << "average\t" << average << '\n';
  out << "n_images\t" << n_images << '\n';
  out << "seed\t" << seed << '\n';
  return out.str();
}

std::string SwdReport::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (auto it = per_level.rbegin(); it != per_level.rend(); ++it) levels[std::to_string(it->first)] = it->second;
  j["per_level"] = levels;
  j["average"] = average;
  j["scale"] = kReportScale;
  j["n_images"] = n_images;
  j["seed"] = seed;
  j["patch_size"] = config.patch_size;
  j["patches_per_image"] = config.patches_per_image;
  j["n_projections"] = config.n_projections * config.repeats;
  j["real_subset"] = real_subset;
  j["fake_subset"] = fake_subset;
  return j.dump(2);
}

SwdReport evaluate_sets(const std::vector<Tensor>& real, const std::vector<Tensor>& fake, std::uint64_t seed,
                        const SwdConfig& config) {
  if (real.empty() || real.size() != fake.size())
    throw std::invalid_argument("evaluate: need equal, non-zero image counts (real " + std::to_string(real.size()) +
                                ", fake " + std::to_string(fake.size()) + ")");
  if (config.repeats == 0 || config.n_projections == 0) throw std::invalid_argument("evaluate: no projections");
  const Shape shape = real.front().shape();
  check_image(real.front());
  for (const auto* set : {&real, &fake})
    for (const auto& im : *set)
      if (im.shape() != shape)
        throw nn::ShapeError("evaluate: image shapes differ (" + nn::to_string(im.shape()) + " vs " +
                             nn::to_string(shape) + ")");
  const std::size_t levels = level_count(shape[1]);

  std::vector<std::vector<Tensor>> real_levels(levels), fake_levels(levels);
  for (const auto& im : real) {
    auto p = laplacian_pyramid(im, levels);
    for (std::size_t l = 0; l < levels; ++l) real_levels[l].push_back(std::move(p[l]));
  }
  for (const auto& im : fake) {
    auto p = laplacian_pyramid(im, levels);
    for (std::size_t l = 0; l < levels; ++l) fake_levels[l].push_back(std::move(p[l]));
  }

  SwdReport report;
  report.n_images = real.size();
  report.seed = seed;
  report.config = config;
  double sum = 0.0;
  for (std::size_t l = 0; l < levels; ++l) {
    // Both sides share the patch stream, so identical inputs compare equal.
    const std::uint64_t patch_seed = Rng::derived(seed, 2 * l).next_u64();
    const DescriptorSet a = descriptors(real_levels[l], config.patches_per_image, config.patch_size, patch_seed);
    const DescriptorSet b = descriptors(fake_levels[l], config.patches_per_image, config.patch_size, patch_seed);
    double d = 0.0;
    for (std::size_t r = 0; r < config.repeats; ++r)
      d += sliced_wasserstein(a, b, config.n_projections, Rng::derived(seed, 2 * l + 1).next_u64() + r);
    d /= static_cast<double>(config.repeats);
    report.per_level[shape[1] >> l] = d * kReportScale;
    sum += d * kReportScale;
  }
  report.average = sum / static_cast<double>(levels);
  return report;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> choose_subset(std::size_t available, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need at least one image");
  if (available < n)
    throw std::invalid_argument("insufficient images: " + std::to_string(available) + " available, " +
                                std::to_string(n) + " requested");
  std::vector<std::size_t> idx(available);
  for (std::size_t i = 0; i < available; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(available - i)]);
  idx.resize(n);
  return idx;
}

std::vector<Tensor> load_images(const std::vector<fs::path>& paths, const std::vector<std::size_t>& subset,
                                std::size_t resolution, std::size_t channels) {
  std::vector<Tensor> out;
  out.reserve(subset.size());
  for (std::size_t i : subset) out.push_back(data::preprocess(img::read_png(paths.at(i)), resolution, channels));
  return out;
}

SwdReport evaluate(const fs::path& real_dir, const fs::path& fake_dir, std::size_t n_images,
                   std::size_t resolution, std::uint64_t seed, const SwdConfig& config) {
  const auto real_paths = list_images(real_dir), fake_paths = list_images(fake_dir);
  const std::uint64_t subset_seed = Rng::derived(seed, 0xC0FFEE).next_u64();
  auto real_subset = choose_subset(real_paths.size(), n_images, subset_seed);
  auto fake_subset = choose_subset(fake_paths.size(), n_images, subset_seed);
  SwdReport r = evaluate_sets(load_images(real_paths, real_subset, resolution, 3),
                              load_images(fake_paths, fake_subset, resolution, 3), seed, config);
  r.real_subset = std::move(real_subset);
  r.fake_subset = std::move(fake_subset);
  return r;
}

SwdReport evaluate(const fs::path& real_dir, const std::vector<Tensor>& fake, std::uint64_t seed,
                   const SwdConfig& config) {
  if (fake.empty()) throw std::invalid_argument("evaluate: no generated images");
  check_image(fake.front());
  const auto real_paths = list_images(real_dir);
  const std::uint64_t subset_seed = Rng::derived(seed, 0xC0FFEE).next_u64();
  auto subset = choose_subset(real_paths.size(), fake.size(), subset_seed);
  SwdReport r = evaluate_sets(load_images(real_paths, subset, fake.front().dim(1), fake.front().dim(0)), fake,
                              seed, config);
  r.real_subset = std::move(subset);
  return r;
}

}  // namespace sngan::swd
