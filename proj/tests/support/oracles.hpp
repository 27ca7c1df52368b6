#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "sngan/autograd.hpp"
#include "sngan/data.hpp"
#include "sngan/tensor.hpp"

namespace oracle {

using sngan::nn::Tensor;
using sngan::nn::Var;

/// Five-point central difference of a scalar function along one coordinate.
inline double central_difference(const std::function<double()>& f, float& coordinate, double h) {
  const float saved = coordinate;
  auto at = [&](double offset) {
    coordinate = static_cast<float>(saved + offset);
    return f();
  };
  const double d = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
  coordinate = saved;
  return d;
}

/// ‖a − b‖ / max(‖a‖, ‖b‖); 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-12 ? 0.0 : std::sqrt(diff) / scale;
}

/// Compares autograd gradients of `f` (a single-element output) with finite
/// differences for every leaf. Returns the worst per-leaf relative error.
inline double gradient_error(const std::function<Var()>& f, std::vector<Var> leaves, double h = 1e-2) {
  const Var out = f();
  const auto analytic = sngan::nn::grad(out, leaves);
  double worst = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor& value = leaves[k].leaf_value();
    std::vector<double> a(value.size()), n(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
      a[i] = analytic[k].value()[i];
      n[i] = central_difference([&] { return static_cast<double>(f().value().item()); }, value[i], h);
    }
    worst = std::max(worst, relative_error(a, n));
  }
  return worst;
}

/// Largest singular value through a full SVD.
inline double sigma_max(const Tensor& matrix2d) {
  Eigen::MatrixXd m(matrix2d.dim(0), matrix2d.dim(1));
  for (std::size_t r = 0; r < matrix2d.dim(0); ++r)
    for (std::size_t c = 0; c < matrix2d.dim(1); ++c) m(r, c) = matrix2d[r * matrix2d.dim(1) + c];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

/// Exact optimal 1-D transport cost between equal-size point sets, by
/// enumerating every matching: min over π of mean |a_i − b_π(i)|.
inline double brute_force_transport(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += std::abs(a[i] - b[perm[i]]);
    best = std::min(best, cost / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Fraction of pixels brighter than the midpoint between the darkest and
/// brightest luma of a [C, R, R] image in [−1, 1], restricted to the
/// bounding box of the bright pixels. A filled disc covers π/4 of its box,
/// a filled square all of it.
inline double box_fill_ratio(const Tensor& chw) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  std::vector<double> luma(h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) luma[i] += chw[ch * h * w + i] / static_cast<double>(c);
  const auto [lo, hi] = std::minmax_element(luma.begin(), luma.end());
  const double mid = (*lo + *hi) / 2.0;
  std::size_t x0 = w, x1 = 0, y0 = h, y1 = 0, bright = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (luma[y * w + x] > mid) {
        x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
        ++bright;
      }
  if (bright == 0) return 0.0;
  const double box = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
  return static_cast<double>(bright) / box;
}

/// Circle (0) versus square (1) by fill ratio; the threshold sits between
/// π/4 ≈ 0.785 and 1.
inline std::size_t classify_shape(const Tensor& chw) { return box_fill_ratio(chw) > 0.89 ? 1 : 0; }

/// Nearest class template by Pearson correlation, for [1, R, R] images.
class TemplateClassifier {
 public:
  /// Templates are per-class pixel means of the given labeled [C, R, R]
  /// images, each shifted so its ink centroid sits at the center.
  TemplateClassifier(const std::vector<Tensor>& images, const std::vector<std::size_t>& labels, std::size_t classes)
      : templates_(classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto& t = templates_[labels[i]];
      const auto centered = center(images[i]);
      if (t.empty()) t.assign(centered.size(), 0.0);
      for (std::size_t p = 0; p < t.size(); ++p) t[p] += centered[p];
      ++counts[labels[i]];
    }
    for (std::size_t k = 0; k < classes; ++k)
      for (auto& v : templates_[k]) v /= static_cast<double>(counts[k]);
  }

  std::size_t classify(const Tensor& image) const {
    const auto centered = center(image);
    std::size_t best = 0;
    double best_r = -INFINITY;
    for (std::size_t k = 0; k < templates_.size(); ++k) {
      const double r = correlation(templates_[k], centered);
      if (r > best_r) best_r = r, best = k;
    }
    return best;
  }

 private:
  // Integer shift moving the centroid of (value + 1) to the middle; vacated
  // pixels take the background value −1.
  static std::vector<double> center(const Tensor& image) {
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    double mass = 0, cx = 0, cy = 0;
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double m = image[(k * h + y) * w + x] + 1.0;
          mass += m, cx += m * x, cy += m * y;
        }
    long dx = 0, dy = 0;
    if (mass > 0) {
      dx = std::lround((w - 1) / 2.0 - cx / mass);
      dy = std::lround((h - 1) / 2.0 - cy / mass);
    }
    std::vector<double> out(image.size(), -1.0);
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const long ty = static_cast<long>(y) + dy, tx = static_cast<long>(x) + dx;
          if (ty < 0 || tx < 0 || ty >= static_cast<long>(h) || tx >= static_cast<long>(w)) continue;
          out[(k * h + ty) * w + tx] = image[(k * h + y) * w + x];
        }
    return out;
  }

  static double correlation(const std::vector<double>& t, const std::vector<double>& x) {
    const double n = static_cast<double>(t.size());
    double mt = 0, mx = 0;
    for (std::size_t i = 0; i < t.size(); ++i) mt += t[i], mx += x[i];
    mt /= n, mx /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double a = t[i] - mt, b = x[i] - mx;
      sxy += a * b, sxx += a * a, syy += b * b;
    }
    return sxx == 0 || syy == 0 ? -1.0 : sxy / std::sqrt(sxx * syy);
  }

  std::vector<std::vector<double>> templates_;
};

/// Slice i of a [B, ...] batch.
inline Tensor sample_at(const Tensor& batch, std::size_t i) {
  sngan::nn::Shape s(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t per = batch.sample_size();
  return Tensor(s, std::vector<float>(batch.raw() + i * per, batch.raw() + (i + 1) * per));
}

}  // namespace oracle
