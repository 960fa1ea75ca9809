#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vgwe/network.hpp"
#include "vgwe/solver.hpp"

// Run artifacts: an equilibrium summary, a per-iteration trace table, and a
// final bus-voltage table, plus the parameter-sweep table. All artifacts are
// rendered to strings so byte-level reproducibility is directly testable.
// Each one opens with the same provenance block: code version, scenario
// fingerprint, seed, and the fully resolved solver configuration. Nothing
// time- or host-dependent is ever written, so re-running the same scenario,
// config, and seed reproduces every artifact byte for byte.

namespace vgwe {

inline constexpr std::string_view kCodeVersion = "0.3.0";

struct RunManifest {
  std::string scenario_path;  // as given on the command line
  std::string scenario_name;
  std::string scenario_hash;  // fingerprint of the canonical serialization
  SolverConfig config;        // resolved numbers actually used
  std::uint64_t seed = 0;
};

RunManifest make_manifest(std::string_view path, const net::Scenario& scenario,
                          const SolverConfig& used);

// Fixed-format float used in every artifact: shortest of 12 significant
// digits, decimal point, no separators.
std::string fmt_value(double v);

std::string render_summary(const RunManifest& manifest, const net::Scenario& scenario,
                           const EquilibriumResult& result);

// Trace table: header row, then one row per recorded iteration. Column order
// is fixed: iter, active dispatch per generator, bus energy price at each
// station, energy drawn at each station, surcharge at each station, toll per
// constrained road (those with a positive toll at any recorded iteration),
// then the residual block step_delta, imbalance, road_excess, station_excess,
// comp_gap.
std::string render_trace_csv(const RunManifest& manifest, const net::Scenario& scenario,
                             const EquilibriumResult& result);

// Final squared and plain voltage magnitude per bus.
std::string render_voltage_csv(const RunManifest& manifest,
                               const net::Scenario& scenario,
                               const EquilibriumResult& result);

struct SweepRow {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double total_gen_p = 0.0;
  double generation_cost = 0.0;
  Eigen::VectorXd dlmp, demand, surcharge;  // per station
};

// Condenses one sweep point's equilibrium into the row the table needs.
// `scenario` must be the (possibly modified) scenario that produced `result`.
SweepRow summarize_sweep_point(double value, const net::Scenario& scenario,
                               const EquilibriumResult& result);

std::string render_sweep_csv(const RunManifest& manifest, const net::Scenario& base,
                             std::string_view param, const std::vector<SweepRow>& rows);

// Writes `content` to `path`, creating parent directories. Throws net::IoError.
void write_text_file(const std::string& path, std::string_view content);

}  // namespace vgwe
