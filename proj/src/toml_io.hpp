#pragma once

// Minimal TOML access on top of CLI11's config reader: flattens a document
// into "section.key" -> values.

#include <map>
#include <string>
#include <vector>

namespace dualscope {
struct ModelConfig;
}

namespace dualscope::detail {

using TomlTable = std::map<std::string, std::vector<std::string>>;

TomlTable parse_toml(const std::string& text);

std::string toml_string(const TomlTable& t, const std::string& key, const std::string& fallback);
long long toml_int(const TomlTable& t, const std::string& key, long long fallback);
double toml_double(const TomlTable& t, const std::string& key, double fallback);
bool toml_bool(const TomlTable& t, const std::string& key, bool fallback);
std::vector<long long> toml_int_list(const TomlTable& t, const std::string& key, std::vector<long long> fallback);

/// Reads the model.* keys; validates the result.
ModelConfig model_config_from_table(const TomlTable& t);

}  // namespace dualscope::detail
