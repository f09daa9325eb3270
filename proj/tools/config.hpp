#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ssprep::cli {

// Flat key = value text. '#' starts a comment; a [name] line opens a section
// and only keys outside any section or inside [experiment] are kept.
std::map<std::string, std::string> parse_config(std::string_view text, std::string_view experiment);
std::map<std::string, std::string> load_config(const std::string& path, std::string_view experiment);

// Effective parameters of one run. Every key must exist in the defaults.
class Params {
 public:
  explicit Params(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

  // Errc::usage on an unknown key.
  void set(const std::string& key, const std::string& value);
  void merge(const std::map<std::string, std::string>& overrides);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  // Comma list, linspace(a, b, k) or geomspace(a, b, k). Never empty.
  std::vector<double> list(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  // FNV-1a over "key=value\n" in key order, 16 hex digits.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(std::string_view bytes);
std::vector<double> parse_list(const std::string& text);

}  // namespace ssprep::cli
