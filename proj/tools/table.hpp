#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ssprep::cli {

// Empty cells hold std::monostate.
using Cell = std::variant<std::monostate, long, double, std::string>;

struct Row {
  std::vector<Cell> cells;
  std::string flags;  // failures; a flagged row is excluded from fits
  std::string notes;  // informational markers
};

class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  void add(Row row);
  size_t column(const std::string& name) const;  // Errc::usage if absent
  size_t flagged() const;
  // Value of a numeric cell, nullopt when empty or non-numeric.
  std::optional<double> number(size_t row, const std::string& column) const;

  // '#' metadata line, then the header with flags, notes and config_hash appended.
  std::string csv(const std::string& metadata, const std::string& config_hash) const;
  static Table parse_csv(const std::string& text);

 private:
  std::vector<std::string> columns_;
  std::vector<Row> rows_;
};

std::string format_cell(const Cell& c);
void append_flag(std::string& list, const std::string& name);

}  // namespace ssprep::cli
