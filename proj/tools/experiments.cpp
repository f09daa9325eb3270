#include "experiments.hpp"

#include "pool.hpp"

#include "ssprep/bounds.hpp"
#include "ssprep/fermion.hpp"
#include "ssprep/qubit.hpp"
#include "ssprep/spike.hpp"
#include "ssprep/ttss.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#ifndef SSPREP_VERSION
#define SSPREP_VERSION "unknown"
#endif

namespace ssprep::cli {

using nlohmann::json;

size_t ExperimentResult::flagged() const {
  size_t n = table.flagged();
  for (const auto& [_, t] : extra) n += t.flagged();
  return n;
}

namespace {

class RowBuilder {
 public:
  explicit RowBuilder(const std::vector<std::string>& columns) : columns_(&columns) {
    row_.cells.resize(columns.size());
  }
  void set(const std::string& column, Cell value) {
    auto it = std::find(columns_->begin(), columns_->end(), column);
    if (it == columns_->end()) throw std::logic_error("unknown column " + column);
    row_.cells[static_cast<size_t>(it - columns_->begin())] = std::move(value);
  }
  Row& row() noexcept { return row_; }
  Row take() { return std::move(row_); }

 private:
  const std::vector<std::string>* columns_;
  Row row_;
};

// Runs f; a failure flags the row with label:error_code and leaves cells empty.
template <class F>
bool guarded(Row& row, const std::string& label, F&& f) {
  try {
    f();
    return true;
  } catch (const Error& e) {
    std::string code(to_string(e.code()));
    std::replace(code.begin(), code.end(), ' ', '_');
    append_flag(row.flags, label + ":" + code);
  } catch (const std::exception&) {
    append_flag(row.flags, label + ":exception");
  }
  return false;
}

void record_ttss(RowBuilder& b, const std::string& label, const std::string& tau_col, const std::string& it_col,
                 const TTSSRecord& r) {
  b.set(tau_col, r.tau);
  b.set(it_col, static_cast<long>(r.iterations));
  if (r.flags & kFlagResidual) append_flag(b.row().flags, label + ":residual");
  if (r.flags & kFlagNonMonotone) append_flag(b.row().notes, label + ":non_monotone");
  if (r.flags & kFlagAlreadyConverged) append_flag(b.row().notes, label + ":already_converged");
}

double positive(const Params& p, const std::string& key) {
  const double v = p.number(key);
  if (!(v > 0.0)) throw Error(Errc::usage, key + " must be positive");
  return v;
}

std::vector<double> positive_list(const Params& p, const std::string& key) {
  auto v = p.list(key);
  for (double x : v)
    if (!(x > 0.0)) throw Error(Errc::usage, key + " entries must be positive");
  return v;
}

size_t grid_points(const Params& p, const std::string& key = "grid") {
  const int g = p.integer(key);
  if (g < 3) throw Error(Errc::usage, key + " needs at least 3 points");
  return static_cast<size_t>(g);
}

size_t odd_grid_points(const Params& p, const std::string& key) {
  const size_t g = grid_points(p, key);
  if (g % 2 == 0) throw Error(Errc::usage, key + " must be odd (Simpson rule)");
  return g;
}

TTSSOptions ttss_options(const Params& p) {
  TTSSOptions o;
  o.rel_tol = positive(p, "ttss_rel_tol");
  return o;
}

PropagateOptions propagate_options(const Params& p) {
  PropagateOptions o;
  o.control.rtol = positive(p, "ode_rtol");
  o.control.atol = positive(p, "ode_atol");
  return o;
}

json base_summary(const std::string& name, const Params& p) {
  return {{"experiment", name},
          {"config_hash", p.hash()},
          {"code_version", SSPREP_VERSION},
          {"parameters", p.values()},
          {"fits", json::object()},
          {"checks", json::object()}};
}

void finish_summary(ExperimentResult& r) {
  r.summary["rows"] = r.table.rows().size();
  r.summary["flagged_rows"] = r.flagged();
}

std::vector<double> column_values(const Table& t, const std::string& c) {
  std::vector<double> out;
  for (size_t i = 0; i < t.rows().size(); ++i)
    if (auto v = t.number(i, c)) out.push_back(*v);
  return out;
}

SpectrumAt spectrum_of(const Schedule& s) {
  return [s](double x) { return eig_liouvillian(s.generator_at(x)); };
}

// ---------------------------------------------------------------- fermion

const std::vector<std::string> kFermionColumns = {
    "n",        "epsilon",          "gap_relax",         "gap_adia",         "argmin_s",
    "gap_adia_interior", "argmin_s_interior", "tau_relax", "tau_adia", "iterations_relax",
    "iterations_adia"};

FermionModel fermion_base(const Params& p) {
  FermionModel m;
  m.B = p.number("B");
  m.J = p.number("J");
  m.gamma_aniso = p.number("anisotropy");
  const auto rates = positive_list(p, "rates");
  if (rates.size() != 4) throw Error(Errc::usage, "rates needs four entries");
  std::copy(rates.begin(), rates.end(), m.rates.begin());
  return m;
}

// Smallest local minimum of the gap beyond its first local maximum: the
// global minimum sits at s = 0 where the bulk decouples from the baths.
GapScan interior_minimum(const std::function<double(double)>& f, const std::vector<double>& grid, int rounds) {
  std::vector<double> values(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) values[i] = f(grid[i]);
  size_t k = 0;
  while (k + 1 < grid.size() && values[k + 1] >= values[k]) ++k;
  if (k + 1 >= grid.size()) throw Error(Errc::domain, "gap has no interior local minimum");
  return minimize_on_grid(f, std::vector<double>(grid.begin() + static_cast<long>(k), grid.end()), rounds);
}

ExperimentResult fermion_scaling(const Params& p, int workers) {
  const FermionModel base = fermion_base(p);
  const double eps = positive(p, "epsilon");
  const auto grid = uniform_grid(grid_points(p));
  const int rounds = p.integer("refine");
  const auto gap_n = p.int_list("gap_n");
  const auto ttss_n = p.int_list("ttss_n");
  const TTSSOptions topt = ttss_options(p);
  FermionPropagateOptions fopt;
  fopt.rtol = positive(p, "fermion_rtol");
  fopt.atol = positive(p, "fermion_atol");

  std::set<int> all(gap_n.begin(), gap_n.end());
  all.insert(ttss_n.begin(), ttss_n.end());
  const std::set<int> gap_set(gap_n.begin(), gap_n.end()), ttss_set(ttss_n.begin(), ttss_n.end());
  const std::vector<int> points(all.begin(), all.end());

  auto rows = parallel_map<int, Row>(
      points,
      [&](const int& n) {
        RowBuilder b(kFermionColumns);
        b.set("n", static_cast<long>(n));
        b.set("epsilon", eps);
        FermionModel m = base;
        m.n = n;
        if (!guarded(b.row(), "model", [&] { m.validate(); })) return b.take();
        if (gap_set.count(n)) {
          guarded(b.row(), "gap_relax", [&] { b.set("gap_relax", fermion_gap_relax(m)); });
          guarded(b.row(), "gap_adia", [&] {
            const GapScan scan = fermion_gap_adia(m, grid, rounds);
            b.set("gap_adia", scan.value);
            b.set("argmin_s", scan.argmin);
            if (scan.value == 0.0) append_flag(b.row().notes, "gap_adia:degenerate_steady_state");
          });
          guarded(b.row(), "gap_adia_interior", [&] {
            const GapScan scan = interior_minimum([&](double s) { return fermion_min_modulus(m, s); }, grid, rounds);
            b.set("gap_adia_interior", scan.value);
            b.set("argmin_s_interior", scan.argmin);
          });
        }
        if (ttss_set.count(n)) {
          guarded(b.row(), "tau_relax", [&] {
            record_ttss(b, "tau_relax", "tau_relax", "iterations_relax", ttss_fermion_relax(m, eps, topt));
          });
          guarded(b.row(), "tau_adia", [&] {
            record_ttss(b, "tau_adia", "tau_adia", "iterations_adia", ttss_fermion_adia(m, eps, topt, fopt));
          });
        }
        return b.take();
      },
      workers);

  ExperimentResult r{"fermion-scaling", p, Table(kFermionColumns), {}, base_summary("fermion-scaling", p)};
  for (auto& row : rows) r.table.add(std::move(row));
  auto& fits = r.summary["fits"];
  fits["gap_relax_vs_n"] = try_fit(r.table, "n", "gap_relax", FitMode::log_log);
  fits["gap_adia_vs_n"] = try_fit(r.table, "n", "gap_adia", FitMode::log_log);
  fits["gap_adia_interior_vs_n"] = try_fit(r.table, "n", "gap_adia_interior", FitMode::log_log);
  fits["tau_relax_vs_n"] = try_fit(r.table, "n", "tau_relax", FitMode::log_log);
  fits["tau_adia_vs_n"] = try_fit(r.table, "n", "tau_adia", FitMode::log_log);
  fits["tau_adia_vs_gap_adia"] = try_fit(r.table, "gap_adia", "tau_adia", FitMode::log_log);
  fits["tau_adia_vs_gap_adia_interior"] = try_fit(r.table, "gap_adia_interior", "tau_adia", FitMode::log_log);
  if (fits["tau_relax_vs_n"].contains("exponent") && fits["tau_adia_vs_n"].contains("exponent"))
    r.summary["checks"]["relax_exponent_below_adia"] =
        fits["tau_relax_vs_n"]["exponent"].get<double>() < fits["tau_adia_vs_n"]["exponent"].get<double>();
  finish_summary(r);
  return r;
}

// ---------------------------------------------------------------- qubit

struct QubitMeasure {
  bool with_ttss = true;
  bool with_bounds = false;
  std::string relax_initial = "maximally_mixed";
};

DensityMatrix relax_initial_state(const std::string& kind, const Schedule& s) {
  if (kind == "maximally_mixed") return DensityMatrix::maximally_mixed(s.dim());
  if (kind == "gibbs0") return s.initial_state();
  throw Error(Errc::usage, "relax_initial must be maximally_mixed or gibbs0");
}

void measure_qubit(RowBuilder& b, const QubitModel& m, double eps, const std::vector<double>& grid, int rounds,
                   const TTSSOptions& topt, const PropagateOptions& popt, const QubitMeasure& what,
                   size_t bound_points) {
  const Schedule sch = qubit_schedule(m, 1.0);
  guarded(b.row(), "gap_adia", [&] {
    const GapScan scan = gap_adia(spectrum_of(sch), grid, rounds);
    b.set("gap_adia", scan.value);
    b.set("argmin_s_adia", scan.argmin);
  });
  guarded(b.row(), "gap_relevant", [&] {
    b.set("gap_relevant", gap_relevant([&](double s) { return sch.generator_at(s); },
                                       [&](double s) { return sch.hamiltonian_at(s); }, grid, rounds)
                              .value);
  });
  guarded(b.row(), "gap_relax", [&] { b.set("gap_relax", gap_relax(sch.generator_at(1.0))); });
  if (what.with_ttss) {
    double ta = 0.0, tr = 0.0;
    const bool ok_a = guarded(b.row(), "tau_adia", [&] {
      const TTSSRecord rec = ttss_adia(sch, eps, topt, popt);
      record_ttss(b, "tau_adia", "tau_adia", "iterations_adia", rec);
      ta = rec.tau;
    });
    const bool ok_r = guarded(b.row(), "tau_relax", [&] {
      const TTSSRecord rec = ttss_relax(sch.generator_at(1.0), relax_initial_state(what.relax_initial, sch),
                                        sch.steady_at(1.0), eps, topt);
      record_ttss(b, "tau_relax", "tau_relax", "iterations_relax", rec);
      tr = rec.tau;
    });
    if (ok_a && ok_r) b.set("log10_ratio", std::log10(ta / tr));
  }
  if (what.with_bounds) {
    guarded(b.row(), "zero_t_bound", [&] {
      const DaviesPath path{[m](double s) { return m.hamiltonian(s); }, pauli_y(), m.bath()};
      const ZeroTBoundReport rep = zero_T_bound(path, uniform_grid(bound_points));
      b.set("B_int", rep.B_int);
      b.set("B_max", rep.B_max);
      b.set("tau_estimate", estimate_adia(rep.B_max, eps));
    });
  }
}

QubitModel qubit_base(const Params& p) {
  QubitModel m;
  m.omega_x = positive(p, "omega_x");
  m.omega_z = positive(p, "omega_z");
  return m;
}

const std::vector<std::string> kQubitPlaneColumns = {
    "g",        "T",         "beta",          "epsilon",      "tau_adia",        "tau_relax",      "log10_ratio",
    "gap_adia", "gap_relevant", "gap_relax", "argmin_s_adia", "iterations_adia", "iterations_relax"};

// First g (per temperature) where log10_ratio turns from negative to
// non-negative, by linear interpolation.
json sign_changes(const Table& t) {
  std::map<double, std::vector<std::pair<double, double>>> by_t;
  for (size_t i = 0; i < t.rows().size(); ++i) {
    auto g = t.number(i, "g"), temp = t.number(i, "T"), r = t.number(i, "log10_ratio");
    if (g && temp && r && t.rows()[i].flags.empty()) by_t[*temp].emplace_back(*g, *r);
  }
  json out = json::array();
  for (auto& [temp, pts] : by_t) {
    std::sort(pts.begin(), pts.end());
    json entry{{"T", temp}, {"g_crossing", nullptr}};
    for (size_t i = 0; i + 1 < pts.size(); ++i)
      if (pts[i].second < 0.0 && pts[i + 1].second >= 0.0) {
        const auto [g0, r0] = pts[i];
        const auto [g1, r1] = pts[i + 1];
        entry["g_crossing"] = g0 + (g1 - g0) * (-r0) / (r1 - r0);
        break;
      }
    out.push_back(entry);
  }
  return out;
}

ExperimentResult qubit_plane(const Params& p, int workers) {
  const QubitModel base = qubit_base(p);
  const double eps = positive(p, "epsilon");
  const auto gs = positive_list(p, "g");
  auto ts = positive_list(p, "T");
  const auto grid = uniform_grid(grid_points(p));
  const int rounds = p.integer("refine");
  const TTSSOptions topt = ttss_options(p);
  const PropagateOptions popt = propagate_options(p);
  QubitMeasure what;
  what.relax_initial = p.text("relax_initial");

  std::vector<std::pair<double, double>> points;
  for (double g : gs)
    for (double t : ts) points.emplace_back(g, t);
  std::sort(points.begin(), points.end());

  auto rows = parallel_map<std::pair<double, double>, Row>(
      points,
      [&](const std::pair<double, double>& pt) {
        RowBuilder b(kQubitPlaneColumns);
        QubitModel m = base;
        m.g = pt.first;
        m.beta = 1.0 / pt.second;
        b.set("g", m.g);
        b.set("T", pt.second);
        b.set("beta", m.beta);
        b.set("epsilon", eps);
        if (guarded(b.row(), "model", [&] { m.validate(); }))
          measure_qubit(b, m, eps, grid, rounds, topt, popt, what, 0);
        return b.take();
      },
      workers);

  ExperimentResult r{"qubit-plane", p, Table(kQubitPlaneColumns), {}, base_summary("qubit-plane", p)};
  for (auto& row : rows) r.table.add(std::move(row));
  r.summary["checks"]["sign_changes"] = sign_changes(r.table);
  size_t adia_faster = 0, relax_faster = 0;
  for (double v : column_values(r.table, "log10_ratio")) (v < 0.0 ? adia_faster : relax_faster)++;
  r.summary["checks"]["adia_faster_points"] = adia_faster;
  r.summary["checks"]["relax_faster_points"] = relax_faster;
  finish_summary(r);
  return r;
}

const std::vector<std::string> kQubitSlopeColumns = {
    "g",         "T",         "beta",  "epsilon", "tau_adia",     "tau_relax",       "log10_ratio",     "gap_adia",
    "gap_relevant", "gap_relax", "B_int", "B_max",   "tau_estimate", "argmin_s_adia", "iterations_adia", "iterations_relax"};

ExperimentResult qubit_slopes(const Params& p, int workers) {
  const QubitModel base = qubit_base(p);
  const double eps = positive(p, "epsilon");
  const auto gs = positive_list(p, "g");
  const auto ts = positive_list(p, "T");
  const auto grid = uniform_grid(grid_points(p));
  const int rounds = p.integer("refine");
  const size_t bound_points = odd_grid_points(p, "bound_grid");
  const TTSSOptions topt = ttss_options(p);
  const PropagateOptions popt = propagate_options(p);
  QubitMeasure what;
  what.with_bounds = true;
  what.relax_initial = p.text("relax_initial");

  std::vector<std::pair<double, double>> points;
  for (double t : ts)
    for (double g : gs) points.emplace_back(t, g);
  std::sort(points.begin(), points.end());

  auto rows = parallel_map<std::pair<double, double>, Row>(
      points,
      [&](const std::pair<double, double>& pt) {
        RowBuilder b(kQubitSlopeColumns);
        QubitModel m = base;
        m.g = pt.second;
        m.beta = 1.0 / pt.first;
        b.set("g", m.g);
        b.set("T", pt.first);
        b.set("beta", m.beta);
        b.set("epsilon", eps);
        if (guarded(b.row(), "model", [&] { m.validate(); }))
          measure_qubit(b, m, eps, grid, rounds, topt, popt, what, bound_points);
        return b.take();
      },
      workers);

  ExperimentResult r{"qubit-slopes", p, Table(kQubitSlopeColumns), {}, base_summary("qubit-slopes", p)};
  for (auto& row : rows) r.table.add(std::move(row));
  auto& fits = r.summary["fits"];
  if (ts.size() == 1) {
    fits["tau_adia_vs_gap_relevant"] = try_fit(r.table, "gap_relevant", "tau_adia", FitMode::log_log);
    fits["tau_adia_vs_gap_adia"] = try_fit(r.table, "gap_adia", "tau_adia", FitMode::log_log);
    fits["B_max_vs_gap_relevant"] = try_fit(r.table, "gap_relevant", "B_max", FitMode::log_log);
    fits["tau_relax_vs_gap_relax"] = try_fit(r.table, "gap_relax", "tau_relax", FitMode::log_log);
  } else {
    r.summary["checks"]["note"] = "fits need a single temperature; run per T and use the fit subcommand";
  }
  finish_summary(r);
  return r;
}

// ---------------------------------------------------------------- spike

struct SpikePoint {
  int n;
  double g, beta;
  auto operator<=>(const SpikePoint&) const = default;
};

std::vector<SpikePoint> spike_points(const Params& p) {
  std::vector<SpikePoint> pts;
  for (int n : p.int_list("n"))
    for (double g : positive_list(p, "g"))
      for (double beta : positive_list(p, "beta")) pts.push_back({n, g, beta});
  std::sort(pts.begin(), pts.end());
  return pts;
}

void set_spike_keys(RowBuilder& b, const SpikePoint& pt) {
  b.set("n", static_cast<long>(pt.n));
  b.set("g", pt.g);
  b.set("beta", pt.beta);
}

// Fits per (g, beta) only make sense for a single pair.
bool single_family(const Params& p) { return p.list("g").size() == 1 && p.list("beta").size() == 1; }

const std::vector<std::string> kSpikeColumns = {
    "n",        "g",        "beta",          "epsilon",          "tau_relax",       "tau_adia",
    "gap_relax", "gap_adia", "argmin_s_adia", "gap_relax_x_tau_relax", "iterations_relax", "iterations_adia"};

ExperimentResult spike_scaling(const Params& p, int workers) {
  const double eps = positive(p, "epsilon");
  const auto grid = uniform_grid(grid_points(p));
  const int rounds = p.integer("refine");
  const TTSSOptions topt = ttss_options(p);
  const PropagateOptions popt = propagate_options(p);
  const bool with_gap_adia = p.integer("with_gap_adia") != 0;

  auto rows = parallel_map<SpikePoint, Row>(
      spike_points(p),
      [&](const SpikePoint& pt) {
        RowBuilder b(kSpikeColumns);
        set_spike_keys(b, pt);
        b.set("epsilon", eps);
        const SpikeModel m{pt.n, pt.g, pt.beta};
        if (!guarded(b.row(), "model", [&] { m.validate(); })) return b.take();
        const Schedule sch = spike_schedule(m, 1.0);
        const Liouvillian l1 = sch.generator_at(1.0);
        double gr = 0.0;
        const bool ok_gap = guarded(b.row(), "gap_relax", [&] {
          gr = gap_relax(l1);
          b.set("gap_relax", gr);
        });
        if (with_gap_adia)
          guarded(b.row(), "gap_adia", [&] {
            const GapScan scan = gap_adia(spectrum_of(sch), grid, rounds);
            b.set("gap_adia", scan.value);
            b.set("argmin_s_adia", scan.argmin);
          });
        guarded(b.row(), "tau_relax", [&] {
          const TTSSRecord rec = ttss_relax(l1, spike_maximally_mixed(m), sch.steady_at(1.0), eps, topt);
          record_ttss(b, "tau_relax", "tau_relax", "iterations_relax", rec);
          if (ok_gap) b.set("gap_relax_x_tau_relax", gr * rec.tau);
        });
        guarded(b.row(), "tau_adia", [&] {
          record_ttss(b, "tau_adia", "tau_adia", "iterations_adia", ttss_adia(sch, eps, topt, popt));
        });
        return b.take();
      },
      workers);

  ExperimentResult r{"spike-scaling", p, Table(kSpikeColumns), {}, base_summary("spike-scaling", p)};
  for (auto& row : rows) r.table.add(std::move(row));
  if (single_family(p)) {
    auto& fits = r.summary["fits"];
    fits["ln_tau_relax_vs_n"] = try_fit(r.table, "n", "tau_relax", FitMode::log_y);
    fits["tau_relax_vs_n"] = try_fit(r.table, "n", "tau_relax", FitMode::log_log);
    fits["tau_adia_vs_n"] = try_fit(r.table, "n", "tau_adia", FitMode::log_log);
    fits["gap_relax_x_tau_relax_vs_n"] = try_fit(r.table, "n", "gap_relax_x_tau_relax", FitMode::log_log);
    const auto adia = column_values(r.table, "tau_adia");
    bool decreasing = adia.size() == r.table.rows().size() && adia.size() >= 2;
    for (size_t i = 1; decreasing && i < adia.size(); ++i) decreasing = adia[i] < adia[i - 1];
    r.summary["checks"]["tau_adia_strictly_decreasing"] = decreasing;
    if (fits["tau_relax_vs_n"].contains("exponent") && fits["tau_adia_vs_n"].contains("exponent"))
      r.summary["checks"]["relax_scales_better"] =
          fits["tau_relax_vs_n"]["exponent"].get<double>() < fits["tau_adia_vs_n"]["exponent"].get<double>();
  }
  finish_summary(r);
  return r;
}

const std::vector<std::string> kInstantColumns = {"n",     "g",     "beta",  "epsilon",         "tau_eps",
                                                  "tau_adia", "B_int", "B_max", "tau_eps_over_B_int", "iterations_eps",
                                                  "iterations_adia"};

ExperimentResult spike_instantaneous(const Params& p, int workers) {
  const double eps = positive(p, "epsilon");
  const TTSSOptions topt = ttss_options(p);
  PropagateOptions popt = propagate_options(p);
  const int samples = p.integer("samples");
  if (samples < 401) throw Error(Errc::usage, "samples must be at least 401");
  popt.sample_count = static_cast<size_t>(samples);
  const size_t bound_points = odd_grid_points(p, "bound_grid");
  const bool with_adia = p.integer("with_adia") != 0;

  auto rows = parallel_map<SpikePoint, Row>(
      spike_points(p),
      [&](const SpikePoint& pt) {
        RowBuilder b(kInstantColumns);
        set_spike_keys(b, pt);
        b.set("epsilon", eps);
        const SpikeModel m{pt.n, pt.g, pt.beta};
        if (!guarded(b.row(), "model", [&] { m.validate(); })) return b.take();
        const Schedule sch = spike_schedule(m, 1.0);
        double b_int = 0.0, tau_eps = 0.0, tau_adia = 0.0;
        const bool ok_b = guarded(b.row(), "zero_t_bound", [&] {
          const DaviesPath path{[m](double s) { return spike_hamiltonian(m, s); }, spike_jy(m.n), m.bath()};
          const ZeroTBoundReport rep = zero_T_bound(path, uniform_grid(bound_points));
          b_int = rep.B_int;
          b.set("B_int", rep.B_int);
          b.set("B_max", rep.B_max);
          if (rep.argmax_not_first) append_flag(b.row().notes, "zero_t_bound:argmax_not_first");
          if (rep.ill_conditioned) append_flag(b.row().notes, "zero_t_bound:ill_conditioned");
        });
        const bool ok_e = guarded(b.row(), "tau_eps", [&] {
          const TTSSRecord rec = ttss_instantaneous(sch, eps, topt, popt);
          record_ttss(b, "tau_eps", "tau_eps", "iterations_eps", rec);
          tau_eps = rec.tau;
        });
        if (ok_b && ok_e && b_int > 0.0) b.set("tau_eps_over_B_int", tau_eps / (b_int / eps));
        if (with_adia && guarded(b.row(), "tau_adia", [&] {
              const TTSSRecord rec = ttss_adia(sch, eps, topt, popt);
              record_ttss(b, "tau_adia", "tau_adia", "iterations_adia", rec);
              tau_adia = rec.tau;
            }) && ok_e && tau_eps < tau_adia * (1.0 - topt.rel_tol))
          append_flag(b.row().flags, "tau_eps_below_tau_adia");
        return b.take();
      },
      workers);

  ExperimentResult r{"spike-instantaneous", p, Table(kInstantColumns), {}, base_summary("spike-instantaneous", p)};
  for (auto& row : rows) r.table.add(std::move(row));
  if (single_family(p)) {
    auto& fits = r.summary["fits"];
    fits["tau_eps_vs_n"] = try_fit(r.table, "n", "tau_eps", FitMode::log_log);
    fits["B_int_vs_n"] = try_fit(r.table, "n", "B_int", FitMode::log_log);
    const auto ratio = column_values(r.table, "tau_eps_over_B_int");
    if (!ratio.empty()) {
      double spread = 1.0;
      for (double v : ratio) spread = std::max(spread, std::max(v / ratio.front(), ratio.front() / v));
      r.summary["checks"]["ratio_first"] = ratio.front();
      r.summary["checks"]["ratio_max_factor_from_first"] = spread;
    }
  }
  finish_summary(r);
  return r;
}

// ---------------------------------------------------------------- bounds

const std::vector<std::string> kSoundColumns = {"model", "n",   "g",        "beta",       "tau_factor",
                                                "gap_adia", "tau", "tnd", "B",          "B_over_tau", "margin"};

struct BoundUnit {
  std::string model;
  int n = 0;
  double g = 0.0, beta = 0.0;
};

std::vector<Row> soundness_rows(const BoundUnit& u, const Params& p) {
  const auto factors = positive_list(p, "tau_factors");
  const auto grid = uniform_grid(grid_points(p));
  const int rounds = p.integer("refine");
  const auto s_grid = uniform_grid(odd_grid_points(p, "bound_grid"));
  const double fd = positive(p, "fd_step");
  PropagateOptions popt = propagate_options(p);
  popt.sample_count = 0;
  popt.track_distance = false;

  auto keys = [&](RowBuilder& b) {
    b.set("model", u.model);
    if (u.model == "spike") b.set("n", static_cast<long>(u.n));
    b.set("g", u.g);
    b.set("beta", u.beta);
  };
  std::vector<Row> out;
  RowBuilder head(kSoundColumns);
  keys(head);
  std::optional<Schedule> sch;
  double gap = 0.0;
  AdiabaticBound bound;
  const bool ok = guarded(head.row(), "setup", [&] {
    if (u.model == "qubit") {
      QubitModel m;
      m.omega_x = positive(p, "omega_x");
      m.omega_z = positive(p, "omega_z");
      m.g = u.g;
      m.beta = u.beta;
      m.validate();
      sch = qubit_schedule(m, 1.0);
    } else {
      const SpikeModel m{u.n, u.g, u.beta};
      m.validate();
      sch = spike_schedule(m, 1.0);
    }
    gap = gap_adia(spectrum_of(*sch), grid, rounds).value;
    if (!(gap > 0.0)) throw Error(Errc::no_relaxation_gap, "adiabatic gap vanishes");
    bound = adiabatic_B(*sch, s_grid, fd);
  });
  if (!ok) {
    out.push_back(head.take());
    return out;
  }
  const cmat target = sch->steady_at(1.0);
  for (double f : factors) {
    RowBuilder b(kSoundColumns);
    keys(b);
    const double tau = f / gap;
    b.set("tau_factor", f);
    b.set("gap_adia", gap);
    b.set("tau", tau);
    b.set("B", bound.total());
    b.set("B_over_tau", bound.total() / tau);
    guarded(b.row(), "propagate", [&] {
      auto distance = [&](const PropagateOptions& o) {
        return trace_norm_distance(hermitian_part(propagate_adiabatic(sch->with_tau(tau), o).final_rho), target);
      };
      double d = distance(popt);
      // A distance above the bound is re-measured with 1000x tighter
      // tolerances before it counts, since at huge tau it sits near the
      // integrator's error floor.
      if (d > bound.total() / tau) {
        PropagateOptions tight = popt;
        tight.control.rtol = std::max(popt.control.rtol * 1e-3, 1e-13);
        tight.control.atol = std::max(popt.control.atol * 1e-3, 1e-16);
        d = distance(tight);
        append_flag(b.row().notes, "propagate:refined");
      }
      b.set("tnd", d);
      b.set("margin", bound.total() / tau - d);
      if (d > bound.total() / tau) append_flag(b.row().flags, "violation");
    });
    out.push_back(b.take());
  }
  return out;
}

const std::vector<std::string> kZeroTColumns = {
    "g",          "beta",          "B_numeric",          "B_numeric_integral", "B_numeric_boundary0",
    "B_numeric_boundary1", "B_int",  "B_int_exact",       "B_max",              "zero_t_boundary0",
    "zero_t_boundary1",    "ratio_B_int_to_B_numeric", "ratio_integrals", "leading_to_exact_min",
    "leading_to_exact_max", "finite_T_scale"};

struct ZeroTOutcome {
  Row row;
  std::vector<Row> curve;
};

const std::vector<std::string> kEpsColumns = {"g", "s", "eps_leading", "eps_exact"};

ZeroTOutcome zero_t_row(double g, const Params& p) {
  const double beta = positive(p, "zero_t_beta");
  const auto s_grid = uniform_grid(odd_grid_points(p, "bound_grid"));
  const double fd = positive(p, "fd_step");
  ZeroTOutcome out;
  RowBuilder b(kZeroTColumns);
  b.set("g", g);
  b.set("beta", beta);
  QubitModel m;
  m.omega_x = positive(p, "omega_x");
  m.omega_z = positive(p, "omega_z");
  m.g = g;
  m.beta = beta;
  double numeric = 0.0, numeric_int = 0.0;
  const bool ok_n = guarded(b.row(), "B_numeric", [&] {
    m.validate();
    const AdiabaticBound ab = adiabatic_B(qubit_schedule(m, 1.0), s_grid, fd);
    numeric = ab.total();
    numeric_int = ab.integral;
    b.set("B_numeric", ab.total());
    b.set("B_numeric_integral", ab.integral);
    b.set("B_numeric_boundary0", ab.boundary0);
    b.set("B_numeric_boundary1", ab.boundary1);
  });
  guarded(b.row(), "zero_t_bound", [&] {
    const DaviesPath path{[m](double s) { return m.hamiltonian(s); }, pauli_y(), m.bath()};
    const ZeroTBoundReport rep = zero_T_bound(path, s_grid, fd);
    b.set("B_int", rep.B_int);
    b.set("B_int_exact", rep.B_int_exact);
    b.set("B_max", rep.B_max);
    b.set("zero_t_boundary0", rep.boundary0);
    b.set("zero_t_boundary1", rep.boundary1);
    b.set("finite_T_scale", rep.finite_T_scale);
    if (ok_n && numeric > 0.0) b.set("ratio_B_int_to_B_numeric", rep.B_int / numeric);
    if (ok_n && numeric_int > 0.0) b.set("ratio_integrals", rep.B_int / numeric_int);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (size_t i = 0; i < rep.s.size(); ++i) {
      if (rep.eps_exact[i] > 0.0) {
        const double q = rep.eps_leading[i] / rep.eps_exact[i];
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
      RowBuilder c(kEpsColumns);
      c.set("g", g);
      c.set("s", rep.s[i]);
      c.set("eps_leading", rep.eps_leading[i]);
      c.set("eps_exact", rep.eps_exact[i]);
      out.curve.push_back(c.take());
    }
    if (hi > 0.0) {
      b.set("leading_to_exact_min", lo);
      b.set("leading_to_exact_max", hi);
    }
    if (rep.argmax_not_first) append_flag(b.row().notes, "zero_t_bound:argmax_not_first");
    if (rep.ill_conditioned) append_flag(b.row().notes, "zero_t_bound:ill_conditioned");
  });
  out.row = b.take();
  return out;
}

ExperimentResult bounds_check(const Params& p, int workers) {
  std::vector<BoundUnit> units;
  auto qg = positive_list(p, "qubit_g"), qt = positive_list(p, "qubit_T");
  std::sort(qg.begin(), qg.end());
  std::sort(qt.begin(), qt.end());
  for (double g : qg)
    for (double t : qt) units.push_back({"qubit", 0, g, 1.0 / t});
  auto sn = p.int_list("spike_n");
  auto sb = positive_list(p, "spike_beta");
  std::sort(sn.begin(), sn.end());
  std::sort(sb.begin(), sb.end());
  const double sg = positive(p, "spike_g");
  for (int n : sn)
    for (double beta : sb) units.push_back({"spike", n, sg, beta});
  // Validate the shared keys up front so that config errors stay usage errors.
  positive_list(p, "tau_factors");
  odd_grid_points(p, "bound_grid");
  grid_points(p);
  positive(p, "fd_step");
  propagate_options(p);

  auto groups = parallel_map<BoundUnit, std::vector<Row>>(
      units, [&](const BoundUnit& u) { return soundness_rows(u, p); }, workers);
  auto zg = positive_list(p, "zero_t_g");
  std::sort(zg.begin(), zg.end());
  auto zrows = parallel_map<double, ZeroTOutcome>(zg, [&](const double& g) { return zero_t_row(g, p); }, workers);

  ExperimentResult r{"bounds-check", p, Table(kSoundColumns), {}, base_summary("bounds-check", p)};
  size_t violations = 0, checked = 0;
  double worst = 0.0;
  for (auto& grp : groups)
    for (auto& row : grp) {
      r.table.add(std::move(row));
      const size_t i = r.table.rows().size() - 1;
      auto d = r.table.number(i, "tnd"), bt = r.table.number(i, "B_over_tau");
      if (d && bt) {
        ++checked;
        if (*d > *bt) ++violations;
        if (*bt > 0.0) worst = std::max(worst, *d / *bt);
      }
    }
  Table zt(kZeroTColumns), curves(kEpsColumns);
  json zero_t = json::array();
  for (auto& z : zrows) {
    zt.add(std::move(z.row));
    for (auto& c : z.curve) curves.add(std::move(c));
    const size_t i = zt.rows().size() - 1;
    json e{{"g", *zt.number(i, "g")}};
    for (const char* k : {"ratio_B_int_to_B_numeric", "ratio_integrals", "leading_to_exact_min", "leading_to_exact_max"})
      e[k] = zt.number(i, k) ? json(*zt.number(i, k)) : json(nullptr);
    zero_t.push_back(e);
  }
  r.extra.emplace_back("zero_t", std::move(zt));
  r.extra.emplace_back("eps", std::move(curves));
  r.summary["checks"]["soundness_points"] = checked;
  r.summary["checks"]["violations"] = violations;
  r.summary["checks"]["max_tnd_over_bound"] = worst;
  r.summary["checks"]["zero_t"] = zero_t;
  finish_summary(r);
  return r;
}

// ---------------------------------------------------------------- closed spike

const std::vector<std::string> kClosedColumns = {"n", "epsilon", "tau", "iterations", "residual"};

ExperimentResult closed_spike(const Params& p, int workers) {
  const double eps = positive(p, "epsilon");
  const TTSSOptions topt = ttss_options(p);
  const double rtol = positive(p, "ode_rtol");
  auto ns = p.int_list("n");
  std::sort(ns.begin(), ns.end());

  auto rows = parallel_map<int, Row>(
      ns,
      [&](const int& n) {
        RowBuilder b(kClosedColumns);
        b.set("n", static_cast<long>(n));
        b.set("epsilon", eps);
        const SpikeModel m{n, 1.0, 1.0};
        if (!guarded(b.row(), "model", [&] { m.validate(); })) return b.take();
        guarded(b.row(), "tau", [&] {
          const double probe = 1.0 / norm_inf(spike_hamiltonian(m, 1.0));
          const TTSSRecord rec = solve_ttss([&](double tau) { return spike_closed_system(m, tau, 0, rtol).final_tnd; },
                                            eps, probe, 1e8, TTSSMethod::adiabatic, topt);
          record_ttss(b, "tau", "tau", "iterations", rec);
          b.set("residual", rec.residual);
        });
        return b.take();
      },
      workers);

  ExperimentResult r{"closed-spike", p, Table(kClosedColumns), {}, base_summary("closed-spike", p)};
  for (auto& row : rows) r.table.add(std::move(row));
  r.summary["fits"]["tau_vs_n"] = try_fit(r.table, "n", "tau", FitMode::log_log);
  finish_summary(r);
  return r;
}

// ---------------------------------------------------------------- registry

using Runner = ExperimentResult (*)(const Params&, int);

struct Entry {
  Runner run;
  std::map<std::string, std::string> defaults;
};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> r = {
      {"fermion-scaling",
       {fermion_scaling,
        {{"epsilon", "0.1"},
         {"gap_n", "10,15,20,25,30,35,40,45,50,55,60"},
         {"ttss_n", "10,15,20,25,30,35,40"},
         {"grid", "201"},
         {"refine", "3"},
         {"B", "1"},
         {"J", "1"},
         {"anisotropy", "0.5"},
         {"rates", "0.5,0.3,0.1,0.5"},
         {"ttss_rel_tol", "1e-4"},
         {"fermion_rtol", "1e-4"},
         {"fermion_atol", "1e-6"}}}},
      {"qubit-plane",
       {qubit_plane,
        {{"epsilon", "0.01"},
         {"g", "linspace(0.05, 1.5, 20)"},
         {"T", "linspace(0.02, 1, 20)"},
         {"grid", "201"},
         {"refine", "3"},
         {"omega_x", "0.7071067811865476"},
         {"omega_z", "0.7071067811865476"},
         {"relax_initial", "maximally_mixed"},
         {"ttss_rel_tol", "1e-4"},
         {"ode_rtol", "1e-9"},
         {"ode_atol", "1e-12"}}}},
      {"qubit-slopes",
       {qubit_slopes,
        {{"epsilon", "0.01"},
         {"g", "geomspace(0.05, 1.5, 12)"},
         {"T", "0.025"},
         {"grid", "201"},
         {"refine", "3"},
         {"bound_grid", "201"},
         {"omega_x", "0.7071067811865476"},
         {"omega_z", "0.7071067811865476"},
         {"relax_initial", "maximally_mixed"},
         {"ttss_rel_tol", "1e-4"},
         {"ode_rtol", "1e-9"},
         {"ode_atol", "1e-12"}}}},
      {"spike-scaling",
       {spike_scaling,
        {{"epsilon", "0.01"},
         {"n", "8,12,16,20"},
         {"g", "1"},
         {"beta", "1"},
         {"grid", "101"},
         {"refine", "3"},
         {"with_gap_adia", "1"},
         {"ttss_rel_tol", "1e-4"},
         {"ode_rtol", "1e-9"},
         {"ode_atol", "1e-12"}}}},
      {"spike-instantaneous",
       {spike_instantaneous,
        {{"epsilon", "0.01"},
         {"n", "8,12,16,20"},
         {"g", "1"},
         {"beta", "10"},
         {"samples", "401"},
         {"bound_grid", "201"},
         {"with_adia", "1"},
         {"ttss_rel_tol", "1e-4"},
         {"ode_rtol", "1e-9"},
         {"ode_atol", "1e-12"}}}},
      {"bounds-check",
       {bounds_check,
        {{"qubit_g", "linspace(0.05, 1.5, 5)"},
         {"qubit_T", "linspace(0.02, 1, 5)"},
         {"omega_x", "0.7071067811865476"},
         {"omega_z", "0.7071067811865476"},
         {"spike_n", "4,8,12"},
         {"spike_g", "1"},
         {"spike_beta", "1"},
         {"tau_factors", "10,100,1000,10000"},
         {"grid", "101"},
         {"refine", "3"},
         {"bound_grid", "201"},
         {"fd_step", "1e-4"},
         {"zero_t_g", "0.1,0.5,1"},
         {"zero_t_beta", "200"},
         {"ode_rtol", "1e-9"},
         {"ode_atol", "1e-12"}}}},
      {"closed-spike",
       {closed_spike,
        {{"epsilon", "0.01"}, {"n", "8,12,16,20"}, {"ttss_rel_tol", "1e-4"}, {"ode_rtol", "1e-10"}}}},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : registry()) v.push_back(k);
    return v;
  }();
  return names;
}

Params experiment_defaults(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw Error(Errc::usage, "unknown experiment '" + name + "'");
  return Params(it->second.defaults);
}

ExperimentResult run_experiment(const std::string& name, const Params& params, int workers) {
  auto it = registry().find(name);
  if (it == registry().end()) throw Error(Errc::usage, "unknown experiment '" + name + "'");
  if (workers < 1) throw Error(Errc::usage, "workers must be at least 1");
  return it->second.run(params, workers);
}

std::string metadata_line(const ExperimentResult& r) {
  return fmt::format("experiment={} config_hash={} code_version={} {}", r.name, r.params.hash(), SSPREP_VERSION,
                     kUnitsNote);
}

void write_result(const ExperimentResult& r, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::usage, "cannot write " + path.string());
    f << text;
  };
  const std::string meta = metadata_line(r), hash = r.params.hash();
  write(out / (r.name + ".csv"), r.table.csv(meta, hash));
  for (const auto& [suffix, t] : r.extra) write(out / (r.name + "_" + suffix + ".csv"), t.csv(meta, hash));
  write(out / (r.name + ".json"), r.summary.dump(2) + "\n");
}

std::string_view to_string(FitMode m) noexcept {
  switch (m) {
    case FitMode::linear: return "linear";
    case FitMode::log_log: return "log_log";
    case FitMode::log_y: return "log_y";
  }
  return "unknown";
}

json fit_table(const Table& t, const std::string& x, const std::string& y, FitMode mode) {
  t.column(x);
  t.column(y);
  std::vector<double> xs, ys;
  size_t flagged = 0, missing = 0;
  for (size_t i = 0; i < t.rows().size(); ++i) {
    if (!t.rows()[i].flags.empty()) {
      ++flagged;
      continue;
    }
    auto a = t.number(i, x), b = t.number(i, y);
    if (!a || !b) {
      ++missing;
      continue;
    }
    xs.push_back(*a);
    ys.push_back(*b);
  }
  if (xs.size() < 3) throw Error(Errc::usage, fmt::format("fit of {} on {} needs three usable rows", y, x));
  json j{{"x", x}, {"y", y}, {"mode", to_string(mode)}, {"excluded_flagged", flagged}, {"excluded_missing", missing}};
  if (mode == FitMode::log_log) {
    const ScalingEstimate e = fit_power_law(xs, ys);
    j["exponent"] = e.exponent;
    j["prefactor"] = e.prefactor;
    j["slope"] = e.exponent;
    j["intercept"] = std::log(e.prefactor);
    j["r_squared"] = e.r_squared;
    j["points"] = e.points;
    return j;
  }
  if (mode == FitMode::log_y)
    for (double& v : ys) {
      if (!(v > 0.0)) throw Error(Errc::domain, "log fit needs positive y");
      v = std::log(v);
    }
  const LinearFit f = fit_linear(xs, ys);
  j["slope"] = f.slope;
  j["intercept"] = f.intercept;
  j["r_squared"] = f.r_squared;
  j["points"] = f.points;
  return j;
}

json try_fit(const Table& t, const std::string& x, const std::string& y, FitMode mode) {
  try {
    return fit_table(t, x, y, mode);
  } catch (const Error& e) {
    return {{"x", x}, {"y", y}, {"mode", to_string(mode)}, {"error", e.what()}};
  }
}

}  // namespace ssprep::cli
