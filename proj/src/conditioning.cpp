#include "sngan/conditioning.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "sngan/rng.hpp"

namespace sngan::cond {

std::string to_string(Encoding e) { return e == Encoding::one_hot ? "one_hot" : "multi_hot"; }

Encoding parse_encoding(const std::string& s) {
  if (s == "one_hot") return Encoding::one_hot;
  if (s == "multi_hot") return Encoding::multi_hot;
  throw ValidationError("unknown encoding '" + s + "' (expected one_hot or multi_hot)");
}

std::optional<std::size_t> ConditionSchema::index_of(const std::string& attribute) const {
  auto it = std::find(attributes.begin(), attributes.end(), attribute);
  if (it == attributes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attributes.begin());
}

void ConditionSchema::check() const {
  std::set<std::string> seen;
  for (const auto& a : attributes) {
    if (a.empty()) throw ValidationError("schema " + name + ": empty attribute name");
    if (!seen.insert(a).second) throw ValidationError("schema " + name + ": duplicate attribute " + a);
  }
  for (const auto& [a, b] : exclusive)
    if (!index_of(a) || !index_of(b))
      throw ValidationError("schema " + name + ": exclusive pair names an unknown attribute");
}

void ConditionSchema::validate(const std::vector<float>& y) const {
  if (y.size() != dim())
    throw ValidationError("condition has " + std::to_string(y.size()) + " entries, schema " + name +
                          " expects " + std::to_string(dim()));
  std::size_t ones = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0f && y[i] != 1.0f)
      throw ValidationError("attribute " + attributes[i] + " must be 0 or 1");
    ones += y[i] == 1.0f;
  }
  if (encoding == Encoding::one_hot && ones > 1)
    throw ValidationError("schema " + name + " is one-hot; at most one attribute may be set");
  for (const auto& [a, b] : exclusive)
    if (y[*index_of(a)] == 1.0f && y[*index_of(b)] == 1.0f)
      throw ValidationError(a + " and " + b + " cannot both be set");
}

std::string display_name(const std::string& attribute) {
  std::string out;
  for (std::size_t i = 0; i < attribute.size(); ++i) {
    const char c = attribute[i];
    if (c == '_') {
      const bool digits = i > 0 && i + 1 < attribute.size() &&
                          std::isdigit(static_cast<unsigned char>(attribute[i - 1])) &&
                          std::isdigit(static_cast<unsigned char>(attribute[i + 1]));
      out += digits ? '-' : ' ';
    } else {
      out += out.empty() ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
    }
  }
  return out;
}

ConditionSchema face_schema() {
  return {"face",
          Encoding::multi_hot,
          {"gender", "happiness", "age_0_9", "black_hair", "blond_hair", "facial_hair"},
          {{"black_hair", "blond_hair"}}};
}

ConditionSchema landscape_portrait_schema() {
  return {"landscape_portrait", Encoding::one_hot, {"landscape", "portrait"}, {}};
}

ConditionSchema digit_schema() {
  ConditionSchema s{"digits", Encoding::one_hot, {}, {}};
  for (int d = 0; d < 10; ++d) s.attributes.push_back("digit_" + std::to_string(d));
  return s;
}

ConditionSchema shapes_schema() { return {"shapes", Encoding::one_hot, {"circle", "square"}, {}}; }

ConditionSchema gradient_solid_schema() {
  return {"gradient_solid", Encoding::one_hot, {"gradient", "solid"}, {}};
}

bool is_builtin_schema(const std::string& name) {
  return name == "face" || name == "landscape_portrait" || name == "digits" || name == "shapes" ||
         name == "gradient_solid";
}

ConditionSchema schema_by_name(const std::string& name) {
  if (name == "face") return face_schema();
  if (name == "landscape_portrait") return landscape_portrait_schema();
  if (name == "digits") return digit_schema();
  if (name == "shapes") return shapes_schema();
  if (name == "gradient_solid") return gradient_solid_schema();
  throw ValidationError("unknown schema '" + name +
                        "' (built-in: face, landscape_portrait, digits, shapes, gradient_solid)");
}

ConditionVector encode(const ConditionSchema& schema, const Flags& flags) {
  ConditionVector y(schema.dim(), 0.0f);
  for (const auto& [name, value] : flags) {
    const auto idx = schema.index_of(name);
    if (!idx) throw ValidationError("unknown attribute '" + name + "' for schema " + schema.name);
    if (value != 0 && value != 1)
      throw ValidationError("attribute " + name + " must be 0 or 1, got " + std::to_string(value));
    y[*idx] = static_cast<float>(value);
  }
  schema.validate(y);
  return y;
}

std::vector<ConditionVector> grid_conditions(const ConditionSchema& schema,
                                             const std::string& split_attribute, std::size_t n,
                                             std::uint64_t seed) {
  if (n == 0 || n % 2 != 0)
    throw ValidationError("grid size must be a positive even number, got " + std::to_string(n));
  const auto split = schema.index_of(split_attribute);
  if (!split)
    throw ValidationError("split attribute '" + split_attribute + "' not in schema " + schema.name);
  if (schema.encoding == Encoding::one_hot && schema.dim() < 2)
    throw ValidationError("one-hot grid split needs at least two classes");

  Rng rng(seed);
  std::vector<ConditionVector> rows;
  rows.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const bool first_half = r < n / 2;
    ConditionVector y(schema.dim(), 0.0f);
    if (schema.encoding == Encoding::one_hot) {
      if (first_half) {
        y[*split] = 1.0f;
      } else {
        std::size_t k = rng.below(schema.dim() - 1);
        if (k >= *split) ++k;
        y[k] = 1.0f;
      }
    } else {
      for (;;) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
        y[*split] = first_half ? 1.0f : 0.0f;
        bool ok = true;
        for (const auto& [a, b] : schema.exclusive)
          ok = ok && !(y[*schema.index_of(a)] == 1.0f && y[*schema.index_of(b)] == 1.0f);
        if (ok) break;
      }
    }
    rows.push_back(std::move(y));
  }
  return rows;
}

nn::Tensor to_tensor(const std::vector<ConditionVector>& rows, std::size_t dim) {
  std::vector<float> data;
  data.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim)
      throw nn::ShapeError("condition row has " + std::to_string(r.size()) + " entries, expected " +
                           std::to_string(dim));
    data.insert(data.end(), r.begin(), r.end());
  }
  return nn::Tensor({rows.size(), dim}, std::move(data));
}

}  // namespace sngan::cond
