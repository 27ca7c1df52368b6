#include "sngan/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sngan::data {

namespace fs = std::filesystem;
using nn::Shape;

std::uint8_t unscale_pixel(float x) {
  const float v = std::round((x + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
}

Tensor preprocess(const img::Image& image, std::size_t resolution, std::size_t channels) {
  if (image.width == 0 || image.height == 0) throw img::ImageError("empty image");
  if (resolution == 0) throw std::invalid_argument("resolution must be positive");
  if (channels != 1 && channels != 3) throw std::invalid_argument("channels must be 1 or 3");

  const std::size_t side = std::min(image.width, image.height);
  const std::size_t x0 = (image.width - side) / 2, y0 = (image.height - side) / 2;

  // Source plane per output channel, in 8-bit units.
  auto sample = [&](std::size_t x, std::size_t y, std::size_t c) -> float {
    if (image.channels == channels) return image.at(x0 + x, y0 + y, c);
    if (image.channels == 1) return image.at(x0 + x, y0 + y, 0);
    return std::round(0.299f * image.at(x0 + x, y0 + y, 0) + 0.587f * image.at(x0 + x, y0 + y, 1) +
                      0.114f * image.at(x0 + x, y0 + y, 2));
  };

  Tensor out({channels, resolution, resolution});
  const double ratio = static_cast<double>(side) / static_cast<double>(resolution);
  struct Tap {
    std::size_t lo, hi;
    float t;
  };
  std::vector<Tap> taps(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double src = std::clamp((i + 0.5) * ratio - 0.5, 0.0, static_cast<double>(side - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, side - 1), static_cast<float>(src - lo)};
  }
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < resolution; ++y)
      for (std::size_t x = 0; x < resolution; ++x) {
        const Tap& ty = taps[y];
        const Tap& tx = taps[x];
        const float top = sample(tx.lo, ty.lo, c) * (1 - tx.t) + sample(tx.hi, ty.lo, c) * tx.t;
        const float bottom = sample(tx.lo, ty.hi, c) * (1 - tx.t) + sample(tx.hi, ty.hi, c) * tx.t;
        const float v = top * (1 - ty.t) + bottom * ty.t;
        out[(c * resolution + y) * resolution + x] = v / 127.5f - 1.0f;
      }
  return out;
}

img::Image to_image(const Tensor& chw) {
  if (chw.rank() != 3) throw nn::ShapeError("to_image expects [C, H, W], got " + nn::to_string(chw.shape()));
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (c != 1 && c != 3) throw nn::ShapeError("to_image expects 1 or 3 channels");
  img::Image out(w, h, c);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(x, y, k) = unscale_pixel(chw[(k * h + y) * w + x]);
  return out;
}

img::Image tile_grid(const Tensor& batch, std::size_t cols) {
  if (batch.rank() != 4) throw nn::ShapeError("tile_grid expects [N, C, H, W], got " + nn::to_string(batch.shape()));
  if (cols == 0) throw std::invalid_argument("tile_grid: cols must be positive");
  const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const std::size_t rows = (n + cols - 1) / cols;
  img::Image out(cols * w, rows * h, c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ox = (i % cols) * w, oy = (i / cols) * h;
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          out.at(ox + x, oy + y, k) = unscale_pixel(batch[((i * c + k) * h + y) * w + x]);
  }
  return out;
}

Tensor flip_horizontal(const Tensor& chw) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out(chw.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(k * h + y) * w + x] = chw[(k * h + y) * w + (w - 1 - x)];
  return out;
}

// ------------------------------------------------------------------ manifest

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ManifestError("expected a boolean, got '" + s + "'");
}

std::size_t parse_size(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ManifestError("expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string schema_name, encoding;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;  // plain comment
      const std::string key = line.substr(1, eq - 1), value = line.substr(eq + 1);
      try {
        if (key == "resolution") m.resolution = parse_size(value);
        else if (key == "channels") m.channels = parse_size(value);
        else if (key == "flip_double") m.flip_double = parse_bool(value);
        else if (key == "schema") schema_name = value;
        else if (key == "encoding") encoding = value;
        else fail("unknown directive '" + key + "'");
      } catch (const ManifestError& e) {
        fail(e.what());
      }
      continue;
    }
    auto cells = split_tabs(line);
    if (header.empty()) {
      if (cells.empty() || cells[0] != "path") fail("header must start with 'path'");
      header = cells;
      const std::vector<std::string> attrs(header.begin() + 1, header.end());
      if (!attrs.empty()) {
        if (!schema_name.empty() && cond::is_builtin_schema(schema_name)) {
          auto s = cond::schema_by_name(schema_name);
          if (s.attributes != attrs) fail("columns do not match the " + schema_name + " schema");
          m.schema = s;
        } else {
          cond::ConditionSchema s{schema_name.empty() ? "custom" : schema_name,
                                  encoding.empty() ? cond::Encoding::multi_hot : cond::parse_encoding(encoding),
                                  attrs,
                                  {}};
          try {
            s.check();
          } catch (const cond::ValidationError& e) {
            fail(e.what());
          }
          m.schema = s;
        }
      } else if (!schema_name.empty()) {
        fail("schema '" + schema_name + "' declared but the header has no attribute columns");
      }
      continue;
    }
    if (cells.size() != header.size())
      fail("expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    ManifestRecord r{cells[0], std::nullopt};
    if (m.schema) {
      cond::ConditionVector y;
      for (std::size_t i = 1; i < cells.size(); ++i) {
        if (cells[i] != "0" && cells[i] != "1") fail("attribute " + header[i] + " must be 0 or 1");
        y.push_back(cells[i] == "1" ? 1.0f : 0.0f);
      }
      try {
        m.schema->validate(y);
      } catch (const cond::ValidationError& e) {
        fail(e.what());
      }
      r.y = std::move(y);
    }
    m.records.push_back(std::move(r));
  }
  if (header.empty()) throw ManifestError(path.string() + ": missing header line");
  if (m.resolution == 0) throw ManifestError(path.string() + ": resolution must be positive");
  if (m.channels != 1 && m.channels != 3) throw ManifestError(path.string() + ": channels must be 1 or 3");
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  out << "#resolution=" << m.resolution << '\n';
  out << "#channels=" << m.channels << '\n';
  out << "#flip_double=" << (m.flip_double ? 1 : 0) << '\n';
  if (m.schema) {
    out << "#schema=" << m.schema->name << '\n';
    out << "#encoding=" << cond::to_string(m.schema->encoding) << '\n';
  }
  out << "path";
  if (m.schema)
    for (const auto& a : m.schema->attributes) out << '\t' << a;
  out << '\n';
  for (const auto& r : m.records) {
    out << r.path;
    if (m.schema) {
      if (!r.y || r.y->size() != m.schema->dim()) throw ManifestError("record " + r.path + " lacks a condition vector");
      for (float v : *r.y) out << '\t' << (v == 1.0f ? 1 : 0);
    }
    out << '\n';
  }
  if (!out) throw ManifestError("write failed for " + path.string());
}

std::string IngestReport::to_text() const {
  std::ostringstream out;
  for (const auto& f : failed) out << "error\t" << f.path << '\t' << f.message << '\n';
  out << "loaded=" << loaded << " failed=" << failed.size() << " effective=" << effective_size << '\n';
  return out.str();
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset ds;
  ds.manifest = manifest;
  for (const auto& r : manifest.records) {
    const fs::path p = fs::path(r.path).is_absolute() ? fs::path(r.path) : manifest.base_dir / r.path;
    try {
      ds.images.push_back(preprocess(img::read_png(p), manifest.resolution, manifest.channels));
    } catch (const std::exception& e) {
      ds.report.failed.push_back({r.path, e.what()});
      continue;
    }
    if (manifest.schema) ds.conditions.push_back(*r.y);
  }
  ds.report.loaded = ds.images.size();
  ds.report.effective_size = ds.size();
  return ds;
}

// ------------------------------------------------------------------ iterator

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed)
    : dataset_(&dataset), batch_size_(batch_size), seed_(seed) {
  if (dataset.size() == 0) throw std::invalid_argument("dataset is empty");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (batch_size > dataset.size())
    throw std::invalid_argument("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                                std::to_string(dataset.size()));
  order_ = epoch_order(0);
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (dataset_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchIterator::epoch_order(std::uint64_t epoch) const {
  std::vector<std::size_t> order(dataset_->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::derived(seed_, epoch);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

void BatchIterator::seek(IteratorPosition position) {
  if (position.cursor >= dataset_->size())
    throw std::invalid_argument("iterator cursor beyond the dataset");
  epoch_ = position.epoch;
  cursor_ = position.cursor;
  order_ = epoch_order(epoch_);
}

Batch BatchIterator::next() {
  const Dataset& ds = *dataset_;
  const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
  const Shape sample = ds.images.front().shape();
  const std::size_t per = ds.images.front().size();
  Shape shape{count};
  shape.insert(shape.end(), sample.begin(), sample.end());
  Batch batch{Tensor(shape), std::nullopt};
  const std::size_t ydim = ds.y_dim();
  if (ydim) batch.conditions = Tensor({count, ydim});
  const bool doubled = ds.manifest.flip_double;
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t item = order_[cursor_ + b];
    const std::size_t record = doubled ? item / 2 : item;
    const bool flipped = doubled && item % 2 == 1;
    const Tensor& src = ds.images[record];
    const Tensor view = flipped ? flip_horizontal(src) : src;
    std::copy(view.raw(), view.raw() + per, batch.images.raw() + b * per);
    if (ydim) std::copy(ds.conditions[record].begin(), ds.conditions[record].end(), batch.conditions->raw() + b * ydim);
  }
  cursor_ += count;
  if (cursor_ == order_.size()) {
    ++epoch_;
    cursor_ = 0;
    order_ = epoch_order(epoch_);
  }
  return batch;
}

// ------------------------------------------------------------------ synthetic

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::two_class_shapes: return "two_class_shapes";
    case SynthKind::gradient_vs_solid: return "gradient_vs_solid";
    case SynthKind::digit_glyphs: return "digit_glyphs";
  }
  return "unknown";
}

SynthKind parse_synth_kind(const std::string& s) {
  for (auto k : {SynthKind::two_class_shapes, SynthKind::gradient_vs_solid, SynthKind::digit_glyphs})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown synth kind '" + s +
                              "' (expected two_class_shapes, gradient_vs_solid or digit_glyphs)");
}

namespace {

// 5×7 bitmaps, one row per byte, bit 4 is the leftmost column.
constexpr std::uint8_t kDigitFont[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
};

std::uint8_t rand_level(Rng& rng, int lo, int hi) {
  return static_cast<std::uint8_t>(lo + static_cast<int>(rng.below(static_cast<std::size_t>(hi - lo + 1))));
}

img::Image shape_image(std::size_t label, std::size_t res, Rng& rng) {
  img::Image im(res, res, 3);
  std::uint8_t bg[3], fg[3];
  for (auto& v : bg) v = rand_level(rng, 0, 40);
  for (auto& v : fg) v = rand_level(rng, 150, 255);
  for (std::size_t i = 0; i < im.pixels.size(); ++i) im.pixels[i] = bg[i % 3];
  const double extent = res * (0.4 + 0.35 * rng.uniform());  // diameter or side
  const double margin = 1.0;
  const double cx = margin + extent / 2 + rng.uniform() * (res - 2 * margin - extent);
  const double cy = margin + extent / 2 + rng.uniform() * (res - 2 * margin - extent);
  const double r = extent / 2;
  for (std::size_t y = 0; y < res; ++y)
    for (std::size_t x = 0; x < res; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const bool inside = label == 0 ? dx * dx + dy * dy <= r * r
                                     : std::abs(dx) <= r && std::abs(dy) <= r;
      if (inside)
        for (std::size_t c = 0; c < 3; ++c) im.at(x, y, c) = fg[c];
    }
  return im;
}

img::Image gradient_image(std::size_t label, std::size_t res, Rng& rng) {
  img::Image im(res, res, 3);
  std::uint8_t a[3], b[3];
  for (auto& v : a) v = rand_level(rng, 0, 255);
  for (auto& v : b) v = rand_level(rng, 0, 255);
  const double angle = rng.uniform() * 2.0 * 3.14159265358979323846;
  const double ux = std::cos(angle), uy = std::sin(angle);
  for (std::size_t y = 0; y < res; ++y)
    for (std::size_t x = 0; x < res; ++x) {
      const double px = (x + 0.5) / res - 0.5, py = (y + 0.5) / res - 0.5;
      const double t = label == 0 ? std::clamp(0.5 + (px * ux + py * uy) / 1.41421356, 0.0, 1.0) : 0.0;
      for (std::size_t c = 0; c < 3; ++c)
        im.at(x, y, c) = static_cast<std::uint8_t>(std::lround(a[c] * (1 - t) + b[c] * t));
    }
  return im;
}

img::Image glyph_image(std::size_t label, std::size_t res, Rng& rng) {
  img::Image im(res, res, 1);
  const std::size_t cell = std::max<std::size_t>(1, res * 3 / 28);
  const std::size_t gw = 5 * cell, gh = 7 * cell;
  if (gw > res || gh > res) throw std::invalid_argument("resolution too small for digit glyphs");
  const std::size_t jx = res - gw, jy = res - gh;
  const std::size_t ox = jx / 2 - std::min(jx / 2, std::size_t{3}) + rng.below(std::min(jx, std::size_t{6}) + 1);
  const std::size_t oy = jy / 2 - std::min(jy / 2, std::size_t{3}) + rng.below(std::min(jy, std::size_t{6}) + 1);
  const std::uint8_t ink = rand_level(rng, 200, 255);
  for (std::size_t row = 0; row < 7; ++row)
    for (std::size_t col = 0; col < 5; ++col) {
      if (!(kDigitFont[label][row] & (0x10 >> col))) continue;
      for (std::size_t y = 0; y < cell; ++y)
        for (std::size_t x = 0; x < cell; ++x) im.at(ox + col * cell + x, oy + row * cell + y, 0) = ink;
    }
  return im;
}

}  // namespace

img::Image synth_image(SynthKind kind, std::size_t label, std::size_t resolution, Rng& rng) {
  switch (kind) {
    case SynthKind::two_class_shapes: return shape_image(label, resolution, rng);
    case SynthKind::gradient_vs_solid: return gradient_image(label, resolution, rng);
    case SynthKind::digit_glyphs: return glyph_image(label, resolution, rng);
  }
  throw std::invalid_argument("unknown synth kind");
}

DatasetManifest synth_dataset(SynthKind kind, std::size_t n, std::size_t resolution, std::uint64_t seed,
                              const fs::path& dir, bool flip_double) {
  const cond::ConditionSchema schema = kind == SynthKind::two_class_shapes   ? cond::shapes_schema()
                                       : kind == SynthKind::gradient_vs_solid ? cond::gradient_solid_schema()
                                                                              : cond::digit_schema();
  const std::size_t classes = schema.dim();
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("synthetic dataset size must be even and >= 2");
  if (n < classes) throw std::invalid_argument("synthetic dataset needs at least one image per class");

  fs::create_directories(dir / "images");
  DatasetManifest m;
  m.resolution = resolution;
  m.channels = kind == SynthKind::digit_glyphs ? 1 : 3;
  m.flip_double = flip_double;
  m.schema = schema;
  m.base_dir = dir;
  const int digits = std::max<int>(6, static_cast<int>(std::to_string(n - 1).size()));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % classes;
    Rng rng = Rng::derived(seed, i);
    std::string name = std::to_string(i);
    name.insert(0, static_cast<std::size_t>(digits) - name.size(), '0');
    const std::string rel = "images/" + name + ".png";
    img::write_png(dir / rel, synth_image(kind, label, resolution, rng));
    cond::ConditionVector y(classes, 0.0f);
    y[label] = 1.0f;
    m.records.push_back({rel, y});
  }
  write_manifest(dir / "manifest.tsv", m);
  return m;
}

}  // namespace sngan::data
