#pragma once

#include "config.hpp"
#include "table.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ssprep::cli {

inline constexpr const char* kUnitsNote =
    "units: energies in units of the model's reference gap, times in its inverse";

struct ExperimentResult {
  std::string name;
  Params params;
  Table table;
  std::vector<std::pair<std::string, Table>> extra;  // written as <name>_<suffix>.csv
  nlohmann::json summary;

  size_t flagged() const;
};

const std::vector<std::string>& experiment_names();
// Errc::usage for an unknown experiment.
Params experiment_defaults(const std::string& name);
ExperimentResult run_experiment(const std::string& name, const Params& params, int workers = 1);

// Writes <out>/<name>.csv, the extra tables and <out>/<name>.json.
void write_result(const ExperimentResult& result, const std::filesystem::path& out);
std::string metadata_line(const ExperimentResult& result);

enum class FitMode { linear, log_log, log_y };
std::string_view to_string(FitMode m) noexcept;

// Least squares of y on x over unflagged rows where both cells are numeric.
// log_log refuses non-positive data with Errc::domain; fewer than three rows
// is Errc::usage.
nlohmann::json fit_table(const Table& table, const std::string& x, const std::string& y, FitMode mode);
// Same, but failures become {"error": ...} instead of throwing.
nlohmann::json try_fit(const Table& table, const std::string& x, const std::string& y, FitMode mode);

}  // namespace ssprep::cli
