#include "config.hpp"

#include "ssprep/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ssprep::cli {
namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& raw, const std::string& context) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(Errc::usage, fmt::format("{}: '{}' is not a finite number", context, s));
  return v;
}

}  // namespace

std::map<std::string, std::string> parse_config(std::string_view text, std::string_view experiment) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool active = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(Errc::usage, fmt::format("config line {}: unterminated section", lineno));
      active = trim(std::string_view(t).substr(1, t.size() - 2)) == experiment;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(Errc::usage, fmt::format("config line {}: expected key = value", lineno));
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error(Errc::usage, fmt::format("config line {}: empty key or value", lineno));
    if (active) out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> load_config(const std::string& path, std::string_view experiment) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::usage, "cannot read config file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), experiment);
}

void Params::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::usage, "unknown config key '" + key + "'");
  it->second = trim(value);
}

void Params::merge(const std::map<std::string, std::string>& overrides) {
  for (const auto& [k, v] : overrides) set(k, v);
}

const std::string& Params::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::usage, "missing config key '" + key + "'");
  return it->second;
}

double Params::number(const std::string& key) const { return to_double(text(key), key); }

int Params::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw Error(Errc::usage, key + " must be an integer");
  return static_cast<int>(v);
}

std::vector<double> parse_list(const std::string& raw) {
  const std::string s = trim(raw);
  auto spaced = [&](std::string_view name) -> std::vector<double> {
    const std::string inner = s.substr(name.size() + 1, s.size() - name.size() - 2);
    const auto parts = parse_list(inner);
    if (parts.size() != 3 || parts[2] < 2 || parts[2] != std::floor(parts[2]))
      throw Error(Errc::usage, fmt::format("{}(a, b, k) needs k >= 2 points", name));
    const auto k = static_cast<int>(parts[2]);
    const bool geometric = name == "geomspace";
    if (geometric && !(parts[0] > 0.0 && parts[1] > 0.0)) throw Error(Errc::usage, "geomspace needs positive ends");
    std::vector<double> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
      const double f = static_cast<double>(i) / (k - 1);
      out[static_cast<size_t>(i)] = geometric ? std::exp(std::log(parts[0]) + f * std::log(parts[1] / parts[0]))
                                              : parts[0] + f * (parts[1] - parts[0]);
    }
    out.back() = parts[1];
    return out;
  };
  for (std::string_view name : {"linspace", "geomspace"})
    if (s.size() > name.size() + 1 && s.compare(0, name.size(), name) == 0 && s[name.size()] == '(' &&
        s.back() == ')')
      return spaced(name);
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_double(item, "list '" + s + "'"));
  if (out.empty()) throw Error(Errc::usage, "empty list");
  return out;
}

std::vector<double> Params::list(const std::string& key) const {
  try {
    return parse_list(text(key));
  } catch (const Error& e) {
    throw Error(Errc::usage, key + ": " + e.what());
  }
}

std::vector<int> Params::int_list(const std::string& key) const {
  std::vector<int> out;
  for (double v : list(key)) {
    if (v != std::floor(v)) throw Error(Errc::usage, key + " must list integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string Params::hash() const {
  std::string canon;
  for (const auto& [k, v] : values_) canon += k + "=" + v + "\n";
  return fmt::format("{:016x}", fnv1a(canon));
}

}  // namespace ssprep::cli
