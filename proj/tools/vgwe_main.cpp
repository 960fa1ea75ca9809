#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vgwe/artifacts.hpp"
#include "vgwe/network.hpp"
#include "vgwe/scenario_io.hpp"
#include "vgwe/solver.hpp"

// Exit codes: 0 success, 1 solver did not converge, 2 scenario validation
// failure, 3 file or I/O problem.

namespace {

constexpr int kOk = 0;
constexpr int kNoConvergence = 1;
constexpr int kInvalid = 2;
constexpr int kIoFailure = 3;

struct SolveOptions {
  std::string path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
  std::optional<double> theta;
};

vgwe::SolverConfig resolve(const vgwe::net::Scenario& scenario, const SolveOptions& o) {
  vgwe::SolverConfig cfg = vgwe::resolve_config(scenario.solver);
  if (o.seed) cfg.seed = *o.seed;
  if (o.max_iters) cfg.max_iters = *o.max_iters;
  if (o.theta) cfg.theta = *o.theta;
  cfg.trace_every = 1;
  return cfg;
}

int cmd_validate(const std::string& path) {
  nlohmann::json report;
  report["file"] = path;
  report["diagnostics"] = nlohmann::json::array();
  try {
    const vgwe::net::Scenario scenario = vgwe::net::load_scenario(path);
    for (const std::string& warning : vgwe::net::reachability_check(scenario))
      report["diagnostics"].push_back({{"severity", "warning"}, {"message", warning}});
    report["ok"] = true;
    std::cout << report.dump(2) << "\n";
    return kOk;
  } catch (const vgwe::net::ValidationError& e) {
    report["ok"] = false;
    report["diagnostics"].push_back({{"severity", "error"}, {"message", e.what()}});
    std::cout << report.dump(2) << "\n";
    return kInvalid;
  } catch (const vgwe::net::IoError& e) {
    report["ok"] = false;
    report["diagnostics"].push_back({{"severity", "error"}, {"message", e.what()}});
    std::cout << report.dump(2) << "\n";
    return kIoFailure;
  }
}

int cmd_solve(const SolveOptions& o) {
  vgwe::net::Scenario scenario;
  try {
    scenario = vgwe::net::load_scenario(o.path);
  } catch (const vgwe::net::ValidationError& e) {
    std::cerr << "validation: " << e.what() << "\n";
    return kInvalid;
  } catch (const vgwe::net::IoError& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kIoFailure;
  }

  const vgwe::SolverConfig cfg = resolve(scenario, o);
  const vgwe::EquilibriumResult result = vgwe::solve_equilibrium(scenario, cfg);
  const vgwe::RunManifest manifest =
      vgwe::make_manifest(o.path, scenario, result.used);

  const std::string summary = vgwe::render_summary(manifest, scenario, result);
  try {
    if (!o.out_dir.empty()) {
      vgwe::write_text_file(o.out_dir + "/summary.txt", summary);
      vgwe::write_text_file(o.out_dir + "/trace.csv",
                            vgwe::render_trace_csv(manifest, scenario, result));
      vgwe::write_text_file(o.out_dir + "/voltages.csv",
                            vgwe::render_voltage_csv(manifest, scenario, result));
    }
  } catch (const vgwe::net::IoError& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kIoFailure;
  }
  std::cout << summary;
  if (!result.stats.converged) {
    std::cerr << "did not converge within " << cfg.max_iters << " iterations\n";
    return kNoConvergence;
  }
  return kOk;
}

// Sweeps re-solve the scenario once per grid value. Road and station
// coupling caps are lifted for every sweep point so the reported prices
// reflect demand alone; --no-coupling-caps states this explicitly.
void lift_coupling_caps(vgwe::net::Scenario& scenario) {
  for (auto& e : scenario.transport.edges) e.cap = 1e12;
  for (auto& d : scenario.stations) d.cap_energy = 1e12;
}

int cmd_sweep(const SolveOptions& o, const std::string& param,
              const std::vector<double>& values) {
  if (values.empty()) {
    std::cerr << "sweep: empty value grid\n";
    return kInvalid;
  }
  vgwe::net::Scenario base;
  try {
    base = vgwe::net::load_scenario(o.path);
  } catch (const vgwe::net::ValidationError& e) {
    std::cerr << "validation: " << e.what() << "\n";
    return kInvalid;
  } catch (const vgwe::net::IoError& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kIoFailure;
  }

  std::vector<vgwe::SweepRow> rows;
  bool all_converged = true;
  vgwe::SolverConfig cfg_used;
  for (double value : values) {
    vgwe::net::Scenario point = base;
    lift_coupling_caps(point);
    if (param == "n_evs") {
      const int want = static_cast<int>(value);
      if (want < 1 || value != want) {
        std::cerr << "sweep: n_evs values must be positive integers\n";
        return kInvalid;
      }
      // The population generator is sequential in the EV index, so a smaller
      // count is a prefix of a larger one; truncation preserves that here.
      if (want > static_cast<int>(point.evs.size())) {
        std::cerr << "sweep: n_evs value " << want << " exceeds the population ("
                  << point.evs.size() << ")\n";
        return kInvalid;
      }
      point.evs.resize(static_cast<size_t>(want));
    } else if (param == "omega_mean") {
      if (point.evs.empty()) {
        std::cerr << "sweep: scenario has no EVs\n";
        return kInvalid;
      }
      double mean = 0.0;
      for (const auto& ev : point.evs) mean += ev.omega;
      mean /= static_cast<double>(point.evs.size());
      if (mean <= 0.0 || value <= 0.0) {
        std::cerr << "sweep: omega_mean must be positive\n";
        return kInvalid;
      }
      for (auto& ev : point.evs) ev.omega *= value / mean;
    } else {
      std::cerr << "sweep: unknown parameter '" << param << "'\n";
      return kInvalid;
    }

    const vgwe::SolverConfig cfg = resolve(point, o);
    const vgwe::EquilibriumResult result = vgwe::solve_equilibrium(point, cfg);
    all_converged = all_converged && result.stats.converged;
    rows.push_back(vgwe::summarize_sweep_point(value, point, result));
    cfg_used = result.used;
  }

  vgwe::RunManifest manifest = vgwe::make_manifest(o.path, base, cfg_used);
  const std::string table = vgwe::render_sweep_csv(manifest, base, param, rows);
  try {
    if (!o.out_dir.empty()) vgwe::write_text_file(o.out_dir + "/sweep.csv", table);
  } catch (const vgwe::net::IoError& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kIoFailure;
  }
  std::cout << table;
  return all_converged ? kOk : kNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled EV-routing / charging / distribution-grid equilibrium solver"};
  app.require_subcommand(1);

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("file", validate_path, "scenario file")->required();

  SolveOptions solve_opts;
  CLI::App* solve = app.add_subcommand("solve", "Compute one equilibrium");
  solve->add_option("file", solve_opts.path, "scenario file")->required();
  solve->add_option("--seed", solve_opts.seed, "override the solver seed");
  solve->add_option("--max-iters", solve_opts.max_iters, "iteration budget");
  solve->add_option("--theta", solve_opts.theta, "inertia weight in [0, 1/3)");
  solve->add_option("--out", solve_opts.out_dir, "artifact output directory");

  SolveOptions sweep_opts;
  std::string sweep_param;
  std::vector<double> sweep_values;
  bool no_coupling_caps = false;
  CLI::App* sweep = app.add_subcommand("sweep", "Re-solve across a parameter grid");
  sweep->add_option("file", sweep_opts.path, "scenario file")->required();
  sweep->add_option("--param", sweep_param, "n_evs or omega_mean")->required();
  sweep->add_option("--values", sweep_values, "comma-separated grid")
      ->required()
      ->delimiter(',');
  sweep->add_flag("--no-coupling-caps", no_coupling_caps,
                  "lift road and station caps (always on for sweeps)");
  sweep->add_option("--seed", sweep_opts.seed, "override the solver seed");
  sweep->add_option("--max-iters", sweep_opts.max_iters, "iteration budget");
  sweep->add_option("--theta", sweep_opts.theta, "inertia weight in [0, 1/3)");
  sweep->add_option("--out", sweep_opts.out_dir, "artifact output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }
  (void)no_coupling_caps;  // documented default; sweeps always lift the caps

  try {
    if (validate->parsed()) return cmd_validate(validate_path);
    if (solve->parsed()) return cmd_solve(solve_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_param, sweep_values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
