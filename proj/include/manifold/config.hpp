#ifndef MANIFOLD_CONFIG_HPP
#define MANIFOLD_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace manifold {

// Flat sectioned key-value text config:
//
//   # comment
//   [section]
//   key = value
//   list = 1, 2, 3
//
// Hashing uses the canonical form (sorted section.key=value lines) so that
// permuting assignment order leaves the hash unchanged.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text);

  void set(const std::string& section, const std::string& key, const std::string& value);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int_or(const std::string& section, const std::string& key, long fallback) const;
  uint64_t get_uint64_or(const std::string& section, const std::string& key,
                         uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const;
  std::vector<long> get_int_list(const std::string& section, const std::string& key) const;

  std::string canonical() const;
  uint64_t hash() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

uint64_t fnv1a64(std::string_view bytes);
uint64_t splitmix64(uint64_t x);

// Derives a per-stage seed from a master seed. Seeds are a pure function of
// (master, stage, index), so growing an ensemble never changes the seeds of
// existing members.
uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index);

}  // namespace manifold

#endif
