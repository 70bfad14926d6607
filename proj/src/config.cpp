#include "manifold/config.hpp"

#include <fstream>
#include <sstream>

#include "manifold/errors.hpp"

namespace manifold {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream stream(value);
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig config;
  std::istringstream stream(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header at line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key at line " + std::to_string(line_no));
    config.sections_[section][key] = value;
  }
  return config;
}

void KeyValueConfig::set(const std::string& section, const std::string& key,
                         const std::string& value) {
  sections_[section][key] = value;
}

bool KeyValueConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string KeyValueConfig::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s != sections_.end()) {
    const auto k = s->second.find(key);
    if (k != s->second.end()) return k->second;
  }
  throw ConfigError("config: missing required key [" + section + "] " + key);
}

std::string KeyValueConfig::get_or(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key) const {
  const std::string value = get(section, key);
  try {
    size_t pos = 0;
    const double parsed = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " = '" + value + "' is not a number");
  }
}

double KeyValueConfig::get_double_or(const std::string& section, const std::string& key,
                                     double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long KeyValueConfig::get_int(const std::string& section, const std::string& key) const {
  const std::string value = get(section, key);
  try {
    size_t pos = 0;
    const long parsed = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " = '" + value + "' is not an integer");
  }
}

long KeyValueConfig::get_int_or(const std::string& section, const std::string& key,
                                long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

uint64_t KeyValueConfig::get_uint64_or(const std::string& section, const std::string& key,
                                       uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string value = get(section, key);
  try {
    size_t pos = 0;
    const uint64_t parsed = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " = '" + value + "' is not an integer");
  }
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& section,
                                                    const std::string& key) const {
  std::vector<double> values;
  for (const auto& item : split_list(get(section, key))) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config: [" + section + "] " + key + " has non-numeric item '" + item + "'");
    }
  }
  return values;
}

std::vector<long> KeyValueConfig::get_int_list(const std::string& section,
                                               const std::string& key) const {
  std::vector<long> values;
  for (const auto& item : split_list(get(section, key))) {
    try {
      values.push_back(std::stol(item));
    } catch (const std::exception&) {
      throw ConfigError("config: [" + section + "] " + key + " has non-integer item '" + item + "'");
    }
  }
  return values;
}

std::string KeyValueConfig::canonical() const {
  std::ostringstream out;
  for (const auto& [section, entries] : sections_)
    for (const auto& [key, value] : entries) out << section << '.' << key << '=' << value << '\n';
  return out.str();
}

uint64_t KeyValueConfig::hash() const { return fnv1a64(canonical()); }

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t splitmix64(uint64_t x) {
  uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index) {
  return splitmix64(splitmix64(master ^ fnv1a64(stage)) + index);
}

}  // namespace manifold
