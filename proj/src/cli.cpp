#include "sngan/cli.hpp"

#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sngan/config.hpp"
#include "sngan/sampler_service.hpp"
#include "sngan/swd.hpp"
#include "sngan/trainer.hpp"

namespace sngan::cli {

namespace fs = std::filesystem;
using nn::Tensor;

namespace {

/// Validation failures raised by the command layer itself.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string format_vector(const cond::ConditionVector& y) {
  std::string s = "[";
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) s += ",";
    s += y[i] != 0.0f ? "1" : "0";
  }
  return s + "]";
}

/// "--name=value" or bare "--name" (meaning 1) attribute flags.
cond::Flags parse_flags(const std::vector<std::string>& args) {
  cond::Flags flags;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw UsageError("unexpected argument " + a);
    const auto eq = a.find('=');
    const std::string name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    int value = 1;
    if (eq != std::string::npos) {
      const std::string v = a.substr(eq + 1);
      if (v == "0" || v == "false")
        value = 0;
      else if (v == "1" || v == "true")
        value = 1;
      else
        throw UsageError("attribute " + name + " must be 0 or 1, got " + v);
    }
    flags[name] = value;
  }
  return flags;
}

/// Attribute table: header "path<TAB>attr…", one row per image.
struct AttributeTable {
  std::vector<std::string> attributes;
  std::vector<std::pair<std::string, cond::ConditionVector>> rows;
};

AttributeTable read_attribute_table(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read attribute table " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return cells;
  };
  AttributeTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (t.attributes.empty() && cells[0] == "path") {
      t.attributes.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (t.attributes.empty()) throw UsageError(path.string() + ": missing header row");
    if (cells.size() != t.attributes.size() + 1)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(t.attributes.size() + 1) + " columns");
    cond::ConditionVector y;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i] != "0" && cells[i] != "1")
        throw UsageError(path.string() + ":" + std::to_string(line_no) + ": attribute values must be 0 or 1");
      y.push_back(cells[i] == "1" ? 1.0f : 0.0f);
    }
    t.rows.emplace_back(cells[0], std::move(y));
  }
  return t;
}

cond::ConditionSchema schema_for(const std::vector<std::string>& attributes, const std::string& name) {
  if (!name.empty() && cond::is_builtin_schema(name)) {
    auto s = cond::schema_by_name(name);
    if (s.attributes != attributes)
      throw UsageError("attribute table columns do not match schema " + name);
    return s;
  }
  for (const char* builtin : {"face", "landscape_portrait", "digits", "shapes", "gradient_solid"}) {
    auto s = cond::schema_by_name(builtin);
    if (name.empty() && s.attributes == attributes) return s;
  }
  cond::ConditionSchema s;
  s.name = name.empty() ? "custom" : name;
  s.encoding = cond::Encoding::multi_hot;
  s.attributes = attributes;
  return s;
}

struct PrepareArgs {
  std::string synth;
  std::size_t n = 0;
  std::string source;
  std::string attributes;
  std::string schema;
  std::size_t resolution = 32;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  bool flip_double = false;
  std::string out;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  if (a.synth.empty() == a.source.empty()) throw UsageError("give exactly one of --synth or --source");
  if (a.resolution == 0) throw UsageError("--resolution must be positive");
  if (a.channels != 1 && a.channels != 3) throw UsageError("--channels must be 1 or 3");
  const fs::path dir = a.out;
  data::IngestReport report;
  if (!a.synth.empty()) {
    const auto kind = data::parse_synth_kind(a.synth);
    const auto manifest = data::synth_dataset(kind, a.n, a.resolution, a.seed, dir, a.flip_double);
    report = data::load_dataset(manifest).report;
  } else {
    const fs::path source = a.source;
    if (!fs::is_directory(source)) throw UsageError("source directory " + source.string() + " does not exist");
    std::vector<std::pair<std::string, std::optional<cond::ConditionVector>>> items;
    data::DatasetManifest manifest;
    if (!a.attributes.empty()) {
      const auto table = read_attribute_table(a.attributes);
      manifest.schema = schema_for(table.attributes, a.schema);
      for (const auto& [path, y] : table.rows) items.emplace_back(path, y);
    } else {
      if (!a.schema.empty()) throw UsageError("--schema needs an --attributes table");
      for (const auto& p : swd::list_images(source)) items.emplace_back(fs::relative(p, source).generic_string(), std::nullopt);
    }
    if (items.empty()) throw UsageError("source " + source.string() + " contains no images");
    manifest.resolution = a.resolution;
    manifest.channels = a.channels;
    manifest.flip_double = a.flip_double;
    manifest.base_dir = dir;
    fs::create_directories(dir / "images");
    for (const auto& [rel, y] : items) {
      try {
        if (y && manifest.schema) manifest.schema->validate(*y);
        const auto image = img::read_png(source / rel);
        const Tensor t = data::preprocess(image, a.resolution, a.channels);
        std::string name = std::to_string(manifest.records.size());
        name.insert(0, name.size() < 6 ? 6 - name.size() : 0, '0');
        const std::string cached = "images/" + name + ".png";
        img::write_png(dir / cached, data::to_image(t));
        manifest.records.push_back({cached, y});
        ++report.loaded;
      } catch (const std::exception& e) {
        report.failed.push_back({rel, e.what()});
      }
    }
    report.effective_size = manifest.effective_size();
    if (manifest.records.empty()) {
      write_text(dir / "ingest_report.txt", report.to_text());
      throw std::runtime_error("no image in " + source.string() + " could be decoded");
    }
    data::write_manifest(dir / "manifest.tsv", manifest);
  }
  write_text(dir / "ingest_report.txt", report.to_text());
  for (const auto& f : report.failed) out << "skipped " << f.path << ": " << f.message << '\n';
  out << "manifest " << (dir / "manifest.tsv").string() << '\n';
  out << "loaded=" << report.loaded << " failed=" << report.failed.size() << " effective=" << report.effective_size
      << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config_path, bool resume, const std::vector<std::string>& extras,
              std::ostream& out) {
  config::Entries entries;
  if (!config_path.empty()) entries = config::read_ini(config_path);
  entries = config::merge(entries, config::parse_overrides(extras));
  const auto manifest_it = entries.find("data.manifest");
  if (manifest_it == entries.end() || manifest_it->second.empty())
    throw config::ConfigError("data.manifest", "required");
  data::DatasetManifest manifest = data::read_manifest(manifest_it->second);
  const config::RunConfig rc = config::resolve(entries, manifest.schema);
  const train::RunPaths paths{rc.out_dir};
  fs::create_directories(paths.out_dir);
  const std::string echo = config::to_ini(rc);
  write_text(paths.out_dir / "config.ini", echo);

  train::TrainState state;
  if (resume) {
    if (!fs::exists(paths.latest_checkpoint()))
      throw train::CheckpointError("no checkpoint to resume at " + paths.latest_checkpoint().string());
    state = train::load_checkpoint(paths.latest_checkpoint(), &rc.train.model);
    state.config.total_iterations = rc.train.total_iterations;
    out << "resumed at iteration " << state.iteration << '\n';
  } else {
    state = train::init_state(rc.train, manifest.schema);
  }
  state.config_echo = echo;

  manifest.resolution = rc.train.model.resolution;
  manifest.channels = rc.train.model.channels();
  const data::Dataset dataset = data::load_dataset(manifest);
  for (const auto& f : dataset.report.failed) out << "skipped " << f.path << ": " << f.message << '\n';
  if (dataset.size() == 0) throw std::runtime_error("dataset has no decodable images");
  train::run(state, dataset, paths, [&](const std::string& line) { out << line << '\n' << std::flush; });
  out << "finished at iteration " << state.iteration << '\n';
  return kExitOk;
}

int cmd_sample(const std::string& checkpoint, std::size_t count, std::uint64_t seed, const std::string& out_path,
               const std::vector<std::string>& extras, std::ostream& out) {
  if (count == 0) throw UsageError("--count must be positive");
  const cond::Flags flags = parse_flags(extras);
  if (!fs::exists(checkpoint)) throw train::CheckpointError("checkpoint " + checkpoint + " does not exist");
  auto state = train::load_checkpoint(checkpoint);
  std::optional<Tensor> ys;
  if (state.schema) {
    const auto y = cond::encode(*state.schema, flags);
    ys = cond::to_tensor(std::vector<cond::ConditionVector>(count, y), y.size());
    out << "y " << format_vector(y) << '\n';
  } else if (!flags.empty()) {
    throw UsageError("the checkpoint holds an unconditional model; attribute flags are not accepted");
  }
  Rng rng(seed);
  const Tensor z = arch::sample_z(count, state.config.model.z_dim, rng);
  const Tensor images = train::generate(state.pair, z, ys ? &*ys : nullptr);
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const auto grid = data::tile_grid(images, cols);
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  img::write_png(out_path, grid);
  out << "wrote " << out_path << " (" << grid.width << "x" << grid.height << ")\n";
  return kExitOk;
}

/// Conditions for evaluation samples: classes in rotation for one-hot
/// schemas, independent fair bits (resampled on exclusivity) otherwise.
std::vector<cond::ConditionVector> eval_conditions(const cond::ConditionSchema& schema, std::size_t n, Rng& rng) {
  std::vector<cond::ConditionVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    cond::ConditionVector y(schema.dim(), 0.0f);
    if (schema.encoding == cond::Encoding::one_hot) {
      y[i % schema.dim()] = 1.0f;
    } else {
      for (;;) {
        for (auto& v : y) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
        try {
          schema.validate(y);
          break;
        } catch (const cond::ValidationError&) {
        }
      }
    }
    rows.push_back(std::move(y));
  }
  return rows;
}

int cmd_eval(const std::string& real, const std::string& fake, const std::string& checkpoint, std::size_t n,
             std::uint64_t seed, std::size_t resolution, const std::string& out_dir, std::ostream& out) {
  if (fake.empty() == checkpoint.empty()) throw UsageError("give exactly one of --fake or --checkpoint");
  if (!fs::is_directory(real)) throw UsageError("real directory " + real + " does not exist");
  swd::SwdReport report;
  if (!fake.empty()) {
    if (!fs::is_directory(fake)) throw UsageError("fake directory " + fake + " does not exist");
    std::size_t res = resolution;
    if (res == 0) {
      const auto listing = swd::list_images(real);
      if (listing.empty()) throw UsageError("real directory " + real + " contains no images");
      const auto first = img::read_png(listing.front());
      res = std::min(first.width, first.height);
    }
    report = swd::evaluate(real, fake, n, res, seed);
  } else {
    if (!fs::exists(checkpoint)) throw train::CheckpointError("checkpoint " + checkpoint + " does not exist");
    auto state = train::load_checkpoint(checkpoint);
    Rng rng = Rng::derived(seed, 7);
    std::vector<Tensor> fakes;
    std::vector<cond::ConditionVector> conditions;
    if (state.schema) conditions = eval_conditions(*state.schema, n, rng);
    for (std::size_t start = 0; start < n; start += train::kGridCount) {
      const std::size_t b = std::min(train::kGridCount, n - start);
      const Tensor z = arch::sample_z(b, state.config.model.z_dim, rng);
      std::optional<Tensor> ys;
      if (state.schema)
        ys = cond::to_tensor({conditions.begin() + static_cast<std::ptrdiff_t>(start),
                              conditions.begin() + static_cast<std::ptrdiff_t>(start + b)},
                             state.schema->dim());
      const Tensor images = train::generate(state.pair, z, ys ? &*ys : nullptr);
      const auto& s = images.shape();
      const std::size_t per = s[1] * s[2] * s[3];
      for (std::size_t i = 0; i < b; ++i) {
        Tensor one({s[1], s[2], s[3]});
        std::copy(images.raw() + i * per, images.raw() + (i + 1) * per, one.data().begin());
        fakes.push_back(std::move(one));
      }
    }
    report = swd::evaluate(real, fakes, seed);
  }
  const std::string text = report.to_text();
  write_text(fs::path(out_dir) / "swd_report.txt", text);
  write_text(fs::path(out_dir) / "swd_report.json", report.to_json());
  out << text;
  return kExitOk;
}

std::atomic<service::SamplerService*> g_serving{nullptr};

int cmd_serve(const std::string& config_path, std::string checkpoint, std::string loss_log, const std::string& host,
              int port, std::ostream& out) {
  if (!config_path.empty()) {
    const auto rc = config::resolve(config::read_ini(config_path));
    const train::RunPaths paths{rc.out_dir};
    if (checkpoint.empty()) checkpoint = paths.latest_checkpoint().string();
    if (loss_log.empty()) loss_log = paths.loss_log().string();
  }
  service::SamplerService svc(loss_log.empty() ? std::nullopt : std::optional<fs::path>(loss_log));
  if (!checkpoint.empty()) {
    if (!fs::exists(checkpoint)) throw train::CheckpointError("checkpoint " + checkpoint + " does not exist");
    svc.load(fs::path(checkpoint));
    out << "loaded " << checkpoint << '\n';
  } else {
    out << "no checkpoint given; /sample and /schema answer 503\n";
  }
  out << "listening on " << host << ":" << port << '\n' << std::flush;
  g_serving = &svc;
  auto previous_int = std::signal(SIGINT, [](int) {
    if (auto* s = g_serving.load()) s->stop();
  });
  auto previous_term = std::signal(SIGTERM, [](int) {
    if (auto* s = g_serving.load()) s->stop();
  });
  const bool ok = svc.listen(host, port);
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  g_serving = nullptr;
  if (!ok) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectrally normalized conditional GAN toolkit", "sngan"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build a dataset manifest and preprocessed image cache");
  prepare->add_option("--synth", prep.synth, "Synthetic kind: two_class_shapes, gradient_vs_solid, digit_glyphs");
  prepare->add_option("--n", prep.n, "Number of synthetic images");
  prepare->add_option("--source", prep.source, "Directory of PNG images");
  prepare->add_option("--attributes", prep.attributes, "Tab-separated attribute table (path, attributes...)");
  prepare->add_option("--schema", prep.schema, "Condition schema name for the attribute table");
  prepare->add_option("--resolution", prep.resolution, "Target resolution")->capture_default_str();
  prepare->add_option("--channels", prep.channels, "1 or 3")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Synthesis seed")->capture_default_str();
  prepare->add_flag("--flip-double", prep.flip_double, "Double the dataset with horizontal mirrors");
  prepare->add_option("--out", prep.out, "Output directory")->required();

  std::string config_path;
  bool resume = false;
  auto* trainc = app.add_subcommand("train", "Train a model; --section.key=value overrides config fields");
  trainc->add_option("--config", config_path, "INI config file");
  trainc->add_flag("--resume", resume, "Continue from the latest checkpoint in run.out_dir");
  trainc->allow_extras();

  std::string checkpoint, out_path = "sample.png";
  std::size_t count = 64;
  std::uint64_t seed = 0;
  auto* sample = app.add_subcommand("sample", "Generate a grid; --attribute=0|1 sets condition flags");
  sample->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  sample->add_option("--count", count, "Number of images")->capture_default_str();
  sample->add_option("--seed", seed, "Latent seed")->capture_default_str();
  sample->add_option("--out", out_path, "Output PNG")->capture_default_str();
  sample->allow_extras();

  std::string real, fake, eval_out = "eval";
  std::size_t n = 100, resolution = 0;
  auto* eval = app.add_subcommand("eval", "Sliced Wasserstein distance between real and generated images");
  eval->add_option("--real", real, "Directory of real images")->required();
  eval->add_option("--fake", fake, "Directory of generated images");
  eval->add_option("--checkpoint", checkpoint, "Generate the fake side from a checkpoint");
  eval->add_option("--n", n, "Images per side")->capture_default_str();
  eval->add_option("--seed", seed, "Evaluation seed")->capture_default_str();
  eval->add_option("--resolution", resolution, "Comparison resolution for directory pairs (0: from the data)");
  eval->add_option("--out-dir", eval_out, "Report directory")->capture_default_str();

  std::string loss_log, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP sampler service");
  serve->add_option("--config", config_path, "Run config; supplies checkpoint and loss-log paths");
  serve->add_option("--checkpoint", checkpoint, "Checkpoint file");
  serve->add_option("--loss-log", loss_log, "Loss log served by /metrics");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Bind port")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*prepare) return cmd_prepare(prep, out);
    if (*trainc) return cmd_train(config_path, resume, trainc->remaining(), out);
    if (*sample) return cmd_sample(checkpoint, count, seed, out_path, sample->remaining(), out);
    if (*eval) return cmd_eval(real, fake, checkpoint, n, seed, resolution, eval_out, out);
    if (*serve) return cmd_serve(config_path, checkpoint, loss_log, host, port, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const data::ManifestError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace sngan::cli
