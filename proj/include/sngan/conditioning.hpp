#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sngan/tensor.hpp"

namespace sngan::cond {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Encoding { one_hot, multi_hot };

std::string to_string(Encoding e);
Encoding parse_encoding(const std::string& s);

struct ConditionSchema {
  std::string name;
  Encoding encoding = Encoding::one_hot;
  std::vector<std::string> attributes;
  /// Pairs of attributes that may not both be 1.
  std::vector<std::pair<std::string, std::string>> exclusive;

  std::size_t dim() const { return attributes.size(); }
  /// Index of an attribute, or nullopt.
  std::optional<std::size_t> index_of(const std::string& attribute) const;
  /// Throws ValidationError when names repeat or an exclusive pair is unknown.
  void check() const;
  /// Throws ValidationError when `y` is not a valid vector for this schema.
  /// The all-zero vector is accepted for every schema.
  void validate(const std::vector<float>& y) const;
};

/// Human-readable label: "black_hair" -> "Black hair", "age_0_9" -> "Age 0-9".
std::string display_name(const std::string& attribute);

/// [gender, happiness, age_0_9, black_hair, blond_hair, facial_hair], multi-hot,
/// black_hair and blond_hair exclusive.
ConditionSchema face_schema();
/// [landscape, portrait], one-hot.
ConditionSchema landscape_portrait_schema();
/// [digit_0 .. digit_9], one-hot.
ConditionSchema digit_schema();
/// [circle, square], one-hot.
ConditionSchema shapes_schema();
/// [gradient, solid], one-hot.
ConditionSchema gradient_solid_schema();

/// Built-in schema by name: face, landscape_portrait, digits, shapes, gradient_solid.
ConditionSchema schema_by_name(const std::string& name);
bool is_builtin_schema(const std::string& name);

using ConditionVector = std::vector<float>;
/// Named flag values; each must be 0 or 1.
using Flags = std::map<std::string, int>;

/// Vector in schema order; unspecified attributes are 0.
ConditionVector encode(const ConditionSchema& schema, const Flags& flags);

/// n vectors: the first n/2 have `split_attribute` = 1, the rest 0. For
/// multi-hot schemas the other attributes are drawn uniformly from {0, 1}
/// (exclusive pairs resampled); for one-hot schemas the second half takes a
/// uniformly drawn other class.
std::vector<ConditionVector> grid_conditions(const ConditionSchema& schema,
                                             const std::string& split_attribute, std::size_t n,
                                             std::uint64_t seed);

/// Stacks vectors into a [n, dim] tensor.
nn::Tensor to_tensor(const std::vector<ConditionVector>& rows, std::size_t dim);

}  // namespace sngan::cond
