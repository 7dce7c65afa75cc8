#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace safespec {

// Line-oriented key=value configuration with [section] headers and '#'
// comments. Values are strings; typed getters parse on access.
class ConfigFile {
 public:
  static ConfigFile parse_text(const std::string& text);
  static ConfigFile parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback = "") const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<std::uint64_t> get_seed_list(const std::string& section, const std::string& key,
                                           const std::vector<std::uint64_t>& fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& source_text() const { return source_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string source_;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace safespec
