#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcpose/error.hpp"

namespace dcpose {

// Malformed config text, unknown keys or values of the wrong type.
struct ConfigError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// Flat "key = value" text with [section] headers. Keys are addressed as
// "section.key"; every key must be present in the defaults.
class Config {
 public:
  static Config defaults();

  // Values from text override the current ones.
  void merge_text(const std::string& text, const std::string& origin = "<config>");
  void merge_file(const std::string& path);
  // "section.key=value"
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;
  std::vector<std::string> str_list(const std::string& key) const;

  // Canonical text, sections and keys sorted.
  std::string dump() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dcpose
