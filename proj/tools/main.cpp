#include "experiments.hpp"

#include "ssprep/core.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace ssprep;
using namespace ssprep::cli;

struct RunArgs {
  std::string config;
  std::string out = "out";
  std::optional<int> workers;
  std::optional<std::string> epsilon;
  std::optional<std::string> grid;
  std::vector<std::string> sets;
};

int run(const std::string& name, const RunArgs& a) {
  Params params = experiment_defaults(name);
  std::filesystem::path out = a.out;
  int workers = 1;
  if (!a.config.empty()) {
    auto file = load_config(a.config, name);
    // Run-control keys do not enter the parameter hash.
    if (auto it = file.find("workers"); it != file.end()) {
      workers = std::stoi(it->second);
      file.erase(it);
    }
    if (auto it = file.find("out"); it != file.end()) {
      out = it->second;
      file.erase(it);
    }
    params.merge(file);
  }
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(Errc::usage, "--set expects key=value");
    params.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.epsilon) params.set("epsilon", *a.epsilon);
  if (a.grid) params.set("grid", *a.grid);
  if (a.workers) workers = *a.workers;

  const ExperimentResult r = run_experiment(name, params, workers);
  write_result(r, out);
  std::cerr << fmt::format("{}: {} rows, {} flagged, config {} -> {}\n", name, r.table.rows().size(), r.flagged(),
                           r.params.hash(), (out / (name + ".csv")).string());
  return r.flagged() ? 2 : 0;
}

int fit(const std::string& input, const std::string& x, const std::string& y, bool log_log, bool log_y) {
  if (log_log && log_y) throw Error(Errc::usage, "--log-log and --log-y are exclusive");
  std::ifstream f(input);
  if (!f) throw Error(Errc::usage, "cannot read " + input);
  std::stringstream buf;
  buf << f.rdbuf();
  const Table t = Table::parse_csv(buf.str());
  const FitMode mode = log_log ? FitMode::log_log : log_y ? FitMode::log_y : FitMode::linear;
  const nlohmann::json result = fit_table(t, x, y, mode);

  std::filesystem::path summary_path = input;
  summary_path.replace_extension(".json");
  nlohmann::json summary = nlohmann::json::object();
  if (std::ifstream s(summary_path); s) summary = nlohmann::json::parse(s, nullptr, false);
  if (summary.is_discarded() || !summary.is_object()) throw Error(Errc::usage, "unreadable " + summary_path.string());
  if (!summary.contains("fits") || !summary["fits"].is_object()) summary["fits"] = nlohmann::json::object();
  summary["fits"][fmt::format("{}_vs_{}_{}", y, x, to_string(mode))] = result;
  std::ofstream(summary_path) << summary.dump(2) << "\n";
  std::cout << result.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady-state preparation experiments: adiabatic versus relaxation time-to-steady-state"};
  app.require_subcommand(1);

  RunArgs args;
  for (const auto& name : experiment_names()) {
    auto* sub = app.add_subcommand(name, "Run the " + name + " sweep");
    sub->add_option("--config", args.config, "Flat key = value file; [" + name + "] sections apply")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "Output directory")->capture_default_str();
    sub->add_option("--workers", args.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--epsilon", args.epsilon, "Error target");
    sub->add_option("--grid", args.grid, "Grid points of the s scans");
    sub->add_option("--set", args.sets, "Override a parameter, key=value (repeatable)");
  }

  std::string input, x, y;
  bool log_log = false, log_y = false;
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares fit of two CSV columns, appended to the JSON summary");
  fit_cmd->add_option("input", input, "CSV file")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--x", x, "Abscissa column")->required();
  fit_cmd->add_option("--y", y, "Ordinate column")->required();
  fit_cmd->add_flag("--log-log", log_log, "Fit ln y against ln x");
  fit_cmd->add_flag("--log-y", log_y, "Fit ln y against x");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit_cmd->parsed()) return fit(input, x, y, log_log, log_y);
    for (const auto& name : experiment_names())
      if (app.got_subcommand(name)) return run(name, args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
