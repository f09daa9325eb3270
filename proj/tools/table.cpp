#include "table.hpp"

#include "ssprep/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace ssprep::cli {

std::string format_cell(const Cell& c) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(long v) const { return std::to_string(v); }
    std::string operator()(double v) const { return std::isfinite(v) ? fmt::format("{:.10g}", v) : "nan"; }
    std::string operator()(const std::string& v) const { return v; }
  };
  return std::visit(Visitor{}, c);
}

void append_flag(std::string& list, const std::string& name) {
  if (name.empty()) return;
  if (!list.empty()) list += '|';
  list += name;
}

void Table::add(Row row) {
  if (row.cells.size() != columns_.size()) throw Error(Errc::dimension, "row width does not match the header");
  rows_.push_back(std::move(row));
}

size_t Table::column(const std::string& name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw Error(Errc::usage, "no column named '" + name + "'");
  return static_cast<size_t>(it - columns_.begin());
}

size_t Table::flagged() const {
  return static_cast<size_t>(std::count_if(rows_.begin(), rows_.end(), [](const Row& r) { return !r.flags.empty(); }));
}

std::optional<double> Table::number(size_t row, const std::string& name) const {
  const Cell& c = rows_.at(row).cells.at(column(name));
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? std::optional(*d) : std::nullopt;
  if (const auto* l = std::get_if<long>(&c)) return static_cast<double>(*l);
  if (const auto* s = std::get_if<std::string>(&c)) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec == std::errc() && p == s->data() + s->size() && std::isfinite(v)) return v;
  }
  return std::nullopt;
}

std::string Table::csv(const std::string& metadata, const std::string& config_hash) const {
  std::string out = "# " + metadata + "\n";
  for (const auto& c : columns_) out += c + ",";
  out += "flags,notes,config_hash\n";
  for (const auto& r : rows_) {
    for (const auto& c : r.cells) out += format_cell(c) + ",";
    out += r.flags + "," + r.notes + "," + config_hash + "\n";
  }
  return out;
}

Table Table::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& l) {
    std::vector<std::string> parts;
    std::stringstream ss(l);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    if (!l.empty() && l.back() == ',') parts.emplace_back();
    return parts;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    header = split(line);
    break;
  }
  if (header.empty()) throw Error(Errc::usage, "CSV has no header");
  const auto flags_it = std::find(header.begin(), header.end(), "flags");
  const auto notes_it = std::find(header.begin(), header.end(), "notes");
  // The provenance column is regenerated by csv(), so it is not data.
  const auto hash_it = std::find(header.begin(), header.end(), "config_hash");
  std::vector<std::string> columns;
  for (const auto& h : header)
    if (h != "flags" && h != "notes" && h != "config_hash") columns.push_back(h);
  Table t(columns);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto parts = split(line);
    if (parts.size() != header.size()) throw Error(Errc::usage, "CSV row width does not match its header");
    Row r;
    for (size_t i = 0; i < header.size(); ++i) {
      if (flags_it != header.end() && i == static_cast<size_t>(flags_it - header.begin()))
        r.flags = parts[i];
      else if (notes_it != header.end() && i == static_cast<size_t>(notes_it - header.begin()))
        r.notes = parts[i];
      else if (hash_it != header.end() && i == static_cast<size_t>(hash_it - header.begin()))
        continue;
      else
        r.cells.emplace_back(parts[i].empty() ? Cell{} : Cell{parts[i]});
    }
    t.add(std::move(r));
  }
  return t;
}

}  // namespace ssprep::cli
