#include "sngan/config.hpp"

#include <algorithm>
#include <charconv>
#include <type_traits>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sngan::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& known_fields() {
  static const std::vector<std::string> fields = {
      "model.variant",       "model.resolution",      "model.z_dim",
      "model.y_dim",         "model.wiring",          "model.width",
      "model.schema",        "model.dropout",         "model.input_noise_variance",
      "model.label_smooth_alpha",
      "loss.objective",      "loss.lambda_gp",
      "train.batch_size",    "train.total_iterations", "train.d_steps_per_g_step",
      "train.log_every",     "train.sample_every",    "train.checkpoint_every",
      "train.seed",          "train.grid_split",
      "adam_d.learning_rate", "adam_d.beta1",         "adam_d.beta2",
      "adam_d.epsilon",
      "adam_g.learning_rate", "adam_g.beta1",         "adam_g.beta2",
      "adam_g.epsilon",
      "data.manifest",
      "run.out_dir",
  };
  return fields;
}

Entries parse_ini(const std::string& text) {
  Entries out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("", "line " + std::to_string(line_no) + ": key outside of a section");
    const std::string field = section + "." + trim(line.substr(0, eq));
    const auto& known = known_fields();
    if (std::find(known.begin(), known.end(), field) == known.end()) throw ConfigError(field, "unknown field");
    out[field] = trim(line.substr(eq + 1));
  }
  return out;
}

Entries read_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_ini(buf.str());
}

Entries parse_overrides(const std::vector<std::string>& args) {
  Entries out;
  for (const auto& arg : args) {
    if (arg.rfind("--", 0) != 0) throw ConfigError("", "unexpected argument '" + arg + "'");
    const auto eq = arg.find('=');
    if (eq == std::string::npos) throw ConfigError(arg.substr(2), "override needs the form --section.key=value");
    const std::string field = arg.substr(2, eq - 2);
    const auto& known = known_fields();
    if (std::find(known.begin(), known.end(), field) == known.end()) throw ConfigError(field, "unknown field");
    out[field] = arg.substr(eq + 1);
  }
  return out;
}

Entries merge(Entries base, const Entries& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
  return base;
}

namespace {

template <typename T>
T parse_number(const std::string& field, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for floating point is not available everywhere; use strtod.
    char* stop = nullptr;
    const double v = std::strtod(value.c_str(), &stop);
    if (value.empty() || stop != value.c_str() + value.size() || !std::isfinite(v))
      throw ConfigError(field, "expected a number, got '" + value + "'");
    out = static_cast<T>(v);
  } else {
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(field, "expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

class Resolver {
 public:
  explicit Resolver(const Entries& e) : e_(e) {}

  bool has(const std::string& field) const { return e_.count(field) > 0; }

  template <typename T>
  void number(const std::string& field, T& target) const {
    if (auto it = e_.find(field); it != e_.end()) target = parse_number<T>(field, it->second);
  }
  void text(const std::string& field, std::string& target) const {
    if (auto it = e_.find(field); it != e_.end()) target = it->second;
  }
  template <typename F>
  void parsed(const std::string& field, F&& apply) const {
    if (auto it = e_.find(field); it != e_.end()) {
      try {
        apply(it->second);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& ex) {
        throw ConfigError(field, ex.what());
      }
    }
  }

 private:
  const Entries& e_;
};

void adam_fields(const Resolver& r, const std::string& section, nn::AdamParams& p) {
  r.number(section + ".learning_rate", p.learning_rate);
  r.number(section + ".beta1", p.beta1);
  r.number(section + ".beta2", p.beta2);
  r.number(section + ".epsilon", p.epsilon);
}

// Maps a validation message "name: detail" or "detail" onto a field path.
ConfigError as_config_error(const std::invalid_argument& e) {
  const std::string msg = e.what();
  static const std::map<std::string, std::string> fields = {
      {"resolution", "model.resolution"},   {"wiring", "model.wiring"},
      {"z_dim", "model.z_dim"},             {"width", "model.width"},
      {"dropout", "model.dropout"},         {"input_noise_variance", "model.input_noise_variance"},
      {"label_smooth_alpha", "model.label_smooth_alpha"}, {"lambda_gp", "loss.lambda_gp"},
  };
  const auto colon = msg.find(": ");
  if (colon != std::string::npos) {
    const std::string head = msg.substr(0, colon);
    if (auto it = fields.find(head); it != fields.end()) return ConfigError(it->second, msg.substr(colon + 2));
    if (head.find('.') != std::string::npos) return ConfigError(head, msg.substr(colon + 2));
  }
  const auto dot = msg.find('.');
  if (dot != std::string::npos && (msg.rfind("adam_d.", 0) == 0 || msg.rfind("adam_g.", 0) == 0)) {
    const auto space = msg.find(' ', dot);
    return ConfigError(msg.substr(0, space), msg.substr(space + 1));
  }
  return ConfigError("", msg);
}

}  // namespace

RunConfig resolve(const Entries& entries, const std::optional<cond::ConditionSchema>& data_schema) {
  const Resolver r(entries);
  arch::Variant variant = arch::Variant::sn;
  r.parsed("model.variant", [&](const std::string& v) { variant = arch::parse_variant(v); });

  RunConfig c;
  c.train = train::default_config(variant);
  auto& t = c.train;
  auto& m = t.model;

  r.number("model.resolution", m.resolution);
  r.number("model.z_dim", m.z_dim);
  r.number("model.y_dim", m.y_dim);
  r.parsed("model.wiring", [&](const std::string& v) { m.wiring = arch::parse_wiring(v); });
  r.number("model.width", m.width);
  r.text("model.schema", c.schema);

  if (!c.schema.empty() && data_schema && data_schema->name != c.schema)
    throw ConfigError("model.schema", "config names " + c.schema + " but the manifest declares " + data_schema->name);
  if (c.schema.empty() && data_schema && !(r.has("model.wiring") && m.wiring == arch::Wiring::none))
    c.schema = data_schema->name;
  if (!c.schema.empty() && !r.has("model.y_dim")) {
    if (data_schema) {
      m.y_dim = data_schema->dim();
    } else if (cond::is_builtin_schema(c.schema)) {
      m.y_dim = cond::schema_by_name(c.schema).dim();
    } else {
      throw ConfigError("model.y_dim", "required for custom schema " + c.schema + " without a manifest");
    }
  }
  if (m.y_dim > 0 && !r.has("model.wiring"))
    m.wiring = variant == arch::Variant::vanilla_mlp ? arch::Wiring::input_concat : arch::Wiring::tile_conv1_dense;

  m.stabilizers = arch::default_stabilizers(c.schema, m.y_dim > 0);
  r.number("model.dropout", m.stabilizers.dropout);
  r.number("model.input_noise_variance", m.stabilizers.input_noise_variance);
  r.number("model.label_smooth_alpha", m.stabilizers.label_smooth_alpha);

  r.parsed("loss.objective", [&](const std::string& v) {
    if (v == "standard") t.objective = loss::Objective::standard;
    else if (v == "wasserstein") t.objective = loss::Objective::wasserstein;
    else throw ConfigError("loss.objective", "expected standard or wasserstein, got '" + v + "'");
  });
  r.number("loss.lambda_gp", t.lambda_gp);

  r.number("train.batch_size", t.batch_size);
  r.number("train.total_iterations", t.total_iterations);
  r.number("train.d_steps_per_g_step", t.d_steps_per_g_step);
  r.number("train.log_every", t.log_every);
  r.number("train.sample_every", t.sample_every);
  r.number("train.checkpoint_every", t.checkpoint_every);
  r.number("train.seed", t.seed);
  r.text("train.grid_split", t.grid_split);
  adam_fields(r, "adam_d", t.adam_d);
  adam_fields(r, "adam_g", t.adam_g);

  std::string path;
  r.text("data.manifest", path);
  c.manifest = path;
  path = c.out_dir.string();
  r.text("run.out_dir", path);
  c.out_dir = path;

  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw as_config_error(e);
  }
  if (m.y_dim > 0 && c.schema.empty())
    throw ConfigError("model.schema", "a conditional model needs a schema");
  if (m.y_dim == 0 && !c.schema.empty() && r.has("model.schema"))
    throw ConfigError("model.schema", "set for an unconditional model");
  if (!c.schema.empty() && cond::is_builtin_schema(c.schema) && cond::schema_by_name(c.schema).dim() != m.y_dim)
    throw ConfigError("model.y_dim", "schema " + c.schema + " has " +
                                         std::to_string(cond::schema_by_name(c.schema).dim()) + " attributes");
  if (!t.grid_split.empty()) {
    if (m.y_dim == 0) throw ConfigError("train.grid_split", "unconditional model has no attributes");
    const auto s = data_schema ? *data_schema
                               : (cond::is_builtin_schema(c.schema) ? cond::schema_by_name(c.schema)
                                                                    : cond::ConditionSchema{});
    if (!s.attributes.empty() && !s.index_of(t.grid_split))
      throw ConfigError("train.grid_split", "'" + t.grid_split + "' is not an attribute of " + s.name);
  }
  return c;
}

namespace {

// Shortest text that reads back to the same value.
template <typename T>
std::string fmt(T v) {
  char buf[64];
  std::to_chars_result r;
  if constexpr (std::is_floating_point_v<T>)
    r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  else
    r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string to_ini(const RunConfig& c) {
  const auto& t = c.train;
  const auto& m = t.model;
  std::ostringstream o;
  o << "[model]\n"
    << "variant = " << arch::to_string(m.variant) << '\n'
    << "resolution = " << m.resolution << '\n'
    << "z_dim = " << m.z_dim << '\n'
    << "y_dim = " << m.y_dim << '\n'
    << "wiring = " << arch::to_string(m.wiring) << '\n'
    << "width = " << fmt(m.width) << '\n';
  if (!c.schema.empty()) o << "schema = " << c.schema << '\n';
  o << "dropout = " << fmt(m.stabilizers.dropout) << '\n'
    << "input_noise_variance = " << fmt(m.stabilizers.input_noise_variance) << '\n'
    << "label_smooth_alpha = " << fmt(m.stabilizers.label_smooth_alpha) << "\n\n"
    << "[loss]\n"
    << "objective = " << (t.objective == loss::Objective::standard ? "standard" : "wasserstein") << '\n'
    << "lambda_gp = " << fmt(t.lambda_gp) << "\n\n"
    << "[train]\n"
    << "batch_size = " << t.batch_size << '\n'
    << "total_iterations = " << t.total_iterations << '\n'
    << "d_steps_per_g_step = " << t.d_steps_per_g_step << '\n'
    << "log_every = " << t.log_every << '\n'
    << "sample_every = " << t.sample_every << '\n'
    << "checkpoint_every = " << t.checkpoint_every << '\n'
    << "seed = " << t.seed << '\n';
  if (!t.grid_split.empty()) o << "grid_split = " << t.grid_split << '\n';
  for (const auto& [name, p] : {std::pair{"adam_d", t.adam_d}, std::pair{"adam_g", t.adam_g}})
    o << "\n[" << name << "]\n"
      << "learning_rate = " << fmt(p.learning_rate) << '\n'
      << "beta1 = " << fmt(p.beta1) << '\n'
      << "beta2 = " << fmt(p.beta2) << '\n'
      << "epsilon = " << fmt(p.epsilon) << '\n';
  o << "\n[data]\n";
  if (!c.manifest.empty()) o << "manifest = " << c.manifest.string() << '\n';
  o << "\n[run]\n"
    << "out_dir = " << c.out_dir.string() << '\n';
  return o.str();
}

}  // namespace sngan::config
