#include "vgwe/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "vgwe/operator_stack.hpp"
#include "vgwe/scenario_io.hpp"
#include "vgwe/sha256.hpp"

namespace vgwe {

namespace {

std::string config_echo(const SolverConfig& c) {
  std::string s;
  auto kv = [&s](const char* key, const std::string& val) {
    if (!s.empty()) s += ' ';
    s += key;
    s += '=';
    s += val;
  };
  kv("tau", fmt_value(c.tau));
  kv("tau0", fmt_value(c.tau0));
  kv("mu_nodal", fmt_value(c.mu_nodal));
  kv("mu_road", fmt_value(c.mu_road));
  kv("mu_station", fmt_value(c.mu_station));
  kv("theta", fmt_value(c.theta));
  kv("eps_primal", fmt_value(c.eps_primal));
  kv("eps_feas", fmt_value(c.eps_feas));
  kv("eps_dual", fmt_value(c.eps_dual));
  kv("eps_inner", fmt_value(c.eps_inner));
  kv("max_iters", std::to_string(c.max_iters));
  kv("max_inner", std::to_string(c.max_inner));
  kv("station_price_lag", c.station_price_lag ? "true" : "false");
  return s;
}

std::string provenance(const RunManifest& m) {
  std::string s;
  s += "# vgwe ";
  s += kCodeVersion;
  s += "\n# scenario: " + m.scenario_name + "\n";
  s += "# scenario_sha256: " + m.scenario_hash + "\n";
  s += "# seed: " + std::to_string(m.seed) + "\n";
  s += "# config: " + config_echo(m.config) + "\n";
  return s;
}

// Final-state quantities shared by the summary and sweep writers.
struct FinalState {
  AggregateSignal agg;
  Eigen::VectorXd imbalance;
  Eigen::VectorXd gen_p, gen_q;
  Eigen::VectorXd v;          // squared voltage per bus
  Eigen::VectorXd dlmp;       // bus energy price at each station's bus
  Eigen::VectorXd surcharge;  // station capacity price
  Eigen::VectorXd tolls;
  double generation_cost = 0.0;
};

FinalState final_state(const net::Scenario& scenario, const Eigen::VectorXd& z) {
  OperatorStack op(scenario);
  const auto& lay = op.layout();
  const auto& glay = op.dso().layout();

  FinalState fs;
  fs.agg = op.aggregates(z);
  const Eigen::VectorXd y = op.y(z);
  fs.imbalance = op.dso().active_imbalance(y, fs.agg.phi);
  fs.gen_p.resize(glay.n_gen);
  fs.gen_q.resize(glay.n_gen);
  for (int g = 0; g < glay.n_gen; ++g) {
    fs.gen_p[g] = y[glay.p(g)];
    fs.gen_q[g] = y[glay.q(g)];
  }
  fs.v.resize(glay.n_bus);
  for (int b = 0; b < glay.n_bus; ++b) fs.v[b] = y[glay.v(b)];
  const Eigen::VectorXd nodal = op.nodal(z);
  fs.dlmp.resize(lay.n_station);
  for (int d = 0; d < lay.n_station; ++d)
    fs.dlmp[d] = nodal[scenario.stations[d].bus];
  fs.surcharge = op.station(z);
  fs.tolls = op.road(z);
  fs.generation_cost = op.dso().generation_cost(y);
  return fs;
}

}  // namespace

std::string fmt_value(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

RunManifest make_manifest(std::string_view path, const net::Scenario& scenario,
                          const SolverConfig& used) {
  RunManifest m;
  m.scenario_path = std::string(path);
  m.scenario_name = scenario.name;
  m.scenario_hash = sha256_hex(net::serialize_scenario(scenario));
  m.config = used;
  m.seed = used.seed;
  return m;
}

std::string render_summary(const RunManifest& manifest, const net::Scenario& scenario,
                           const EquilibriumResult& result) {
  const FinalState fs = final_state(scenario, result.z);
  const auto& st = result.stats;
  const auto& vi = result.violation;

  std::string s = provenance(manifest);
  s += "\n[result]\n";
  s += "converged = " + std::string(st.converged ? "true" : "false") + "\n";
  s += "iterations = " + std::to_string(st.iterations) + "\n";
  s += "step_delta = " + fmt_value(st.step_delta) + "\n";
  s += "natural_residual = " + fmt_value(st.natural_residual) + "\n";
  s += "imbalance_kw = " + fmt_value(vi.imbalance) + "\n";
  s += "road_excess = " + fmt_value(vi.road_excess) + "\n";
  s += "station_excess_kwh = " + fmt_value(vi.station_excess) + "\n";
  s += "comp_gap = " + fmt_value(vi.comp_gap) + "\n";
  s += "generation_cost = " + fmt_value(fs.generation_cost) + "\n";
  s += "n_evs = " + std::to_string(static_cast<int>(scenario.evs.size())) + "\n";

  s += "\n[generators]\n";
  s += "id bus p_kw q_kvar marginal_cost\n";
  for (size_t g = 0; g < scenario.grid.generators.size(); ++g) {
    const auto& gen = scenario.grid.generators[g];
    const double marginal = 2.0 * gen.a * fs.gen_p[g] + gen.b;
    s += std::to_string(gen.id) + " " + std::to_string(scenario.grid.buses[gen.bus].id) +
         " " + fmt_value(fs.gen_p[g]) + " " + fmt_value(fs.gen_q[g]) + " " +
         fmt_value(marginal) + "\n";
  }

  s += "\n[stations]\n";
  s += "id bus demand_kwh cap_kwh dlmp surcharge total_price\n";
  for (size_t d = 0; d < scenario.stations.size(); ++d) {
    const auto& sd = scenario.stations[d];
    s += std::to_string(sd.id) + " " + std::to_string(scenario.grid.buses[sd.bus].id) +
         " " + fmt_value(fs.agg.phi[d]) + " " + fmt_value(sd.cap_energy) + " " +
         fmt_value(fs.dlmp[d]) + " " + fmt_value(fs.surcharge[d]) + " " +
         fmt_value(fs.dlmp[d] + fs.surcharge[d]) + "\n";
  }

  s += "\n[roads.tolled]\n";
  s += "id toll flow cap\n";
  for (int e : result.violation.binding_roads) {
    const auto& edge = scenario.transport.edges[e];
    s += std::to_string(edge.id) + " " + fmt_value(fs.tolls[e]) + " " +
         fmt_value(fs.agg.sigma[e]) + " " + fmt_value(edge.cap) + "\n";
  }

  double v_min = 0.0, v_max = 0.0;
  if (fs.v.size()) {
    v_min = fs.v.minCoeff();
    v_max = fs.v.maxCoeff();
  }
  s += "\n[voltage]\n";
  s += "min_sq = " + fmt_value(v_min) + "\n";
  s += "max_sq = " + fmt_value(v_max) + "\n";
  return s;
}

std::string render_trace_csv(const RunManifest& manifest, const net::Scenario& scenario,
                             const EquilibriumResult& result) {
  // A road gets a toll column iff its toll is ever positive in the trace.
  std::set<int> tolled;
  for (const auto& row : result.trace)
    for (int e = 0; e < row.road_tolls.size(); ++e)
      if (row.road_tolls[e] > 1e-12) tolled.insert(e);

  std::string s = provenance(manifest);
  s += "iter";
  for (const auto& g : scenario.grid.generators) s += ",p_gen_" + std::to_string(g.id);
  for (const auto& st : scenario.stations) s += ",dlmp_" + std::to_string(st.id);
  for (const auto& st : scenario.stations) s += ",demand_" + std::to_string(st.id);
  for (const auto& st : scenario.stations) s += ",surcharge_" + std::to_string(st.id);
  for (int e : tolled) s += ",toll_" + std::to_string(scenario.transport.edges[e].id);
  s += ",step_delta,imbalance,road_excess,station_excess,comp_gap\n";

  for (const auto& row : result.trace) {
    s += std::to_string(row.iter);
    for (int g = 0; g < row.gen_p.size(); ++g) s += "," + fmt_value(row.gen_p[g]);
    for (const auto& st : scenario.stations)
      s += "," + fmt_value(row.nodal_prices[st.bus]);
    for (int d = 0; d < row.station_demand.size(); ++d)
      s += "," + fmt_value(row.station_demand[d]);
    for (int d = 0; d < row.station_prices.size(); ++d)
      s += "," + fmt_value(row.station_prices[d]);
    for (int e : tolled) s += "," + fmt_value(row.road_tolls[e]);
    s += "," + fmt_value(row.step_delta) + "," + fmt_value(row.imbalance) + "," +
         fmt_value(row.road_excess) + "," + fmt_value(row.station_excess) + "," +
         fmt_value(row.comp_gap) + "\n";
  }
  return s;
}

std::string render_voltage_csv(const RunManifest& manifest,
                               const net::Scenario& scenario,
                               const EquilibriumResult& result) {
  const FinalState fs = final_state(scenario, result.z);
  std::string s = provenance(manifest);
  s += "bus,v_sq,v_kv\n";
  for (size_t b = 0; b < scenario.grid.buses.size(); ++b)
    s += std::to_string(scenario.grid.buses[b].id) + "," + fmt_value(fs.v[b]) + "," +
         fmt_value(std::sqrt(std::max(fs.v[b], 0.0))) + "\n";
  return s;
}

SweepRow summarize_sweep_point(double value, const net::Scenario& scenario,
                               const EquilibriumResult& result) {
  const FinalState fs = final_state(scenario, result.z);
  SweepRow row;
  row.value = value;
  row.converged = result.stats.converged;
  row.iterations = result.stats.iterations;
  row.total_gen_p = fs.gen_p.sum();
  row.generation_cost = fs.generation_cost;
  row.dlmp = fs.dlmp;
  row.demand = fs.agg.phi;
  row.surcharge = fs.surcharge;
  return row;
}

std::string render_sweep_csv(const RunManifest& manifest, const net::Scenario& base,
                             std::string_view param, const std::vector<SweepRow>& rows) {
  std::string s = provenance(manifest);
  s += "# param: ";
  s += param;
  s += "\n";
  s += std::string(param);
  s += ",converged,iterations,total_gen_p,generation_cost";
  for (const auto& st : base.stations) s += ",dlmp_" + std::to_string(st.id);
  for (const auto& st : base.stations) s += ",demand_" + std::to_string(st.id);
  for (const auto& st : base.stations) s += ",surcharge_" + std::to_string(st.id);
  s += "\n";
  for (const auto& row : rows) {
    s += fmt_value(row.value);
    s += row.converged ? ",true" : ",false";
    s += "," + std::to_string(row.iterations);
    s += "," + fmt_value(row.total_gen_p) + "," + fmt_value(row.generation_cost);
    for (int d = 0; d < row.dlmp.size(); ++d) s += "," + fmt_value(row.dlmp[d]);
    for (int d = 0; d < row.demand.size(); ++d) s += "," + fmt_value(row.demand[d]);
    for (int d = 0; d < row.surcharge.size(); ++d) s += "," + fmt_value(row.surcharge[d]);
    s += "\n";
  }
  return s;
}

void write_text_file(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw net::IoError("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw net::IoError("write failed: " + path);
}

}  // namespace vgwe
