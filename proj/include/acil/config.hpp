#ifndef ACIL_CONFIG_HPP
#define ACIL_CONFIG_HPP

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "acil/harness.hpp"

namespace acil {

/// Flat `key = value` settings. Lines starting with '#' and blank lines are ignored.
using ConfigValues = std::map<std::string, std::string>;

ConfigValues parse_config(std::istream& in, const std::string& source_name = "<config>");
ConfigValues read_config_file(const std::string& path);

/// Parse `key=value` override strings. Throws ConfigError on a missing '='.
ConfigValues parse_overrides(std::span<const std::string> assignments);

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string description;
};

/// Every recognised key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Defaults, then `file`, then `overrides` (later layers win). Unknown keys and
/// unparsable values throw ConfigError naming the key. The result is validated.
ExperimentConfig build_experiment_config(const ConfigValues& file, const ConfigValues& overrides);

/// Render a config back to text in the same format (all keys).
std::string render_config(const ExperimentConfig& cfg);

}  // namespace acil

#endif  // ACIL_CONFIG_HPP
