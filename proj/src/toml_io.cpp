#include "toml_io.hpp"

#include <CLI11.hpp>
#include <sstream>
#include <stdexcept>

#include "dualscope/error.hpp"

namespace dualscope::detail {

TomlTable parse_toml(const std::string& text) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw FormatError(std::string("malformed TOML: ") + e.what());
  }
  TomlTable out;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    out[item.fullname()] = item.inputs;
  }
  return out;
}

namespace {
const std::vector<std::string>* find(const TomlTable& t, const std::string& key) {
  const auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

const std::string& single(const std::vector<std::string>& v, const std::string& key) {
  if (v.size() != 1) throw FormatError("TOML key '" + key + "' must hold a single value");
  return v.front();
}
}  // namespace

std::string toml_string(const TomlTable& t, const std::string& key, const std::string& fallback) {
  const auto* v = find(t, key);
  return v ? single(*v, key) : fallback;
}

long long toml_int(const TomlTable& t, const std::string& key, long long fallback) {
  const auto* v = find(t, key);
  if (!v) return fallback;
  try {
    return std::stoll(single(*v, key));
  } catch (const std::logic_error&) {
    throw FormatError("TOML key '" + key + "' is not an integer");
  }
}

double toml_double(const TomlTable& t, const std::string& key, double fallback) {
  const auto* v = find(t, key);
  if (!v) return fallback;
  try {
    return std::stod(single(*v, key));
  } catch (const std::logic_error&) {
    throw FormatError("TOML key '" + key + "' is not a number");
  }
}

bool toml_bool(const TomlTable& t, const std::string& key, bool fallback) {
  const auto* v = find(t, key);
  if (!v) return fallback;
  const std::string& s = single(*v, key);
  if (s == "true") return true;
  if (s == "false") return false;
  throw FormatError("TOML key '" + key + "' is not a boolean");
}

std::vector<long long> toml_int_list(const TomlTable& t, const std::string& key, std::vector<long long> fallback) {
  const auto* v = find(t, key);
  if (!v) return fallback;
  std::vector<long long> out;
  for (const auto& s : *v) {
    try {
      out.push_back(std::stoll(s));
    } catch (const std::logic_error&) {
      throw FormatError("TOML key '" + key + "' holds a non-integer element");
    }
  }
  return out;
}

}  // namespace dualscope::detail
