#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "sngan/trainer.hpp"

namespace sngan::config {

/// Invalid configuration; `field` is the "section.key" path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Flat "section.key" -> raw value.
using Entries = std::map<std::string, std::string>;

/// INI text: [section] headers, key = value lines, '#' or ';' comments.
Entries parse_ini(const std::string& text);
Entries read_ini(const std::filesystem::path& path);

/// Parses "--section.key=value" arguments into entries.
Entries parse_overrides(const std::vector<std::string>& args);

/// Later entries win.
Entries merge(Entries base, const Entries& overrides);

struct RunConfig {
  train::TrainConfig train;
  std::string schema;  // condition schema name; empty when unconditional
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "runs/default";
};

/// Resolves entries against variant defaults. `data_schema` (from the
/// manifest) supplies y_dim, a default wiring and the face stabilizer
/// defaults when those keys are absent.
RunConfig resolve(const Entries& entries, const std::optional<cond::ConditionSchema>& data_schema = std::nullopt);

/// Complete INI text with every field; resolve(parse_ini(to_ini(c))) == c.
std::string to_ini(const RunConfig& config);

/// All recognized "section.key" names.
const std::vector<std::string>& known_fields();

}  // namespace sngan::config
