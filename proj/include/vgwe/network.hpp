#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Domain model for the coupled transport / charging / distribution-grid game.
//
// Unit conventions, fixed at ingestion and used by every module:
//   energy kWh, power kW / kvar / kVA, time h, money $.
//   Squared bus voltages in (kV)^2; line impedances in kOhm, so that
//   v_child = v_parent - 2 r P - 2 x Q holds without conversion factors
//   (kOhm * kW = (kV)^2). Prices are $/kWh, tolls $/vehicle.
// Scenario files may carry blocks in their customary published units; the
// loader converts. docs/scenario_format.md is the normative schema.

namespace vgwe::net {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BprParams {
  double pi = 0.0;  // congestion multiplier, >= 0
  double xi = 0.0;  // congestion exponent, >= 0
};

struct RoadEdge {
  int id = 0;               // external id (as in the scenario file)
  int tail = -1;            // node index, 0-based
  int head = -1;            // node index, 0-based
  double eta = 0.0;         // free-flow travel time, h; > 0
  double kappa = 0.0;       // practical capacity in the latency law, veh/h; > 0
  double background = 0.0;  // ambient flow s_e, veh/h; in [0, cap]
  double cap = 0.0;         // flow cap c^r_e enforced by tolling, veh/h; > 0
};

struct TransportNetwork {
  int n_nodes = 0;
  std::vector<int> node_ids;  // external ids, position = internal index
  std::vector<RoadEdge> edges;
  BprParams bpr;
};

struct StationSpec {
  int id = 0;
  int node = -1;             // transport node index
  int bus = -1;              // grid bus index
  double cap_energy = 0.0;   // energy cap c^t_d, kWh; > 0
  double zeta = 0.0;         // queueing price scale, $; >= 0
  double gamma = 0.0;        // per-charger service rate, veh/h; > 0
  int chargers = 0;          // installed chargers, >= 1
};

struct BusSpec {
  int id = 0;
  double p_load = 0.0;  // kW
  double q_load = 0.0;  // kvar
  double v_min = 0.0;   // (kV)^2; 0 < v_min <= v_max
  double v_max = 0.0;   // (kV)^2
  bool is_substation = false;
};

struct LineSpec {
  int from_bus = -1;   // parent side after radial orientation
  int to_bus = -1;     // child side
  double r = 0.0;      // kOhm; see unit note above
  double x = 0.0;      // kOhm
  double s_max = 0.0;  // apparent-power cap, kVA; > 0
};

struct GeneratorSpec {
  int id = 0;
  int bus = -1;
  double a = 0.0;      // $/kWh^2, > 0
  double b = 0.0;      // $/kWh
  double c = 0.0;      // $
  double p_min = 0.0;  // kW
  double p_max = 0.0;  // kW
  double q_min = 0.0;  // kvar
  double q_max = 0.0;  // kvar
};

struct DistributionNetwork {
  std::vector<BusSpec> buses;
  std::vector<LineSpec> lines;
  std::vector<GeneratorSpec> generators;
  int substation = -1;  // bus index
};

struct EvProfile {
  int id = 0;
  int origin = -1;            // transport node index
  std::vector<int> feasible;  // usable station indices, ascending
  double q = 0.0;             // energy requirement, kWh
  double omega = 0.0;         // value of time, $/h
  double alpha = 0.0;         // route-preference weight
  double beta = 0.0;          // station-preference weight
  Eigen::VectorXd pref_route;    // \tilde r in [0,1]^E
  Eigen::VectorXd pref_station;  // \tilde t, simplex over stations, zero off feasible
};

// Solver knobs carried by the scenario file. Unset fields fall back to
// defaults derived from the estimated operator Lipschitz constant.
struct SolverSettings {
  std::optional<double> tau;      // EV step
  std::optional<double> tau0;     // grid-operator step
  std::optional<double> mu;          // shared dual step
  std::optional<double> mu_nodal;    // per-family overrides of mu
  std::optional<double> mu_road;
  std::optional<double> mu_station;
  std::optional<double> theta;        // inertia, in [0, 1/3)
  std::optional<double> eps_primal;
  std::optional<double> eps_feas;
  std::optional<double> eps_dual;
  std::optional<double> eps_inner;
  std::optional<int> max_iters;
  std::optional<int> max_inner;
  std::optional<std::uint64_t> seed;
  std::optional<bool> station_price_lag;
};

struct Scenario {
  std::string name;
  TransportNetwork transport;
  DistributionNetwork grid;
  std::vector<StationSpec> stations;
  std::vector<EvProfile> evs;
  SolverSettings solver;
};

// Checks the feeder is a tree rooted at the single substation and returns bus
// indices in topological order (parent before child). Reorients lines so
// from_bus is the parent. Throws ValidationError ("feeder not radial", ...)
// on cycles, disconnection, or a wrong line count.
std::vector<int> validate_radial(DistributionNetwork& grid);

// Transport nodes reachable from `origin` by directed edges (origin included).
std::vector<char> reachable_nodes(const TransportNetwork& transport, int origin);

// Per-EV warnings for feasible stations that cannot be reached; such stations
// get their strategy coordinate pinned to zero downstream.
std::vector<std::string> reachability_check(const Scenario& scenario);

// Full structural validation; throws ValidationError naming the violated
// invariant and the offending entity. Called by the loader; exposed for
// programmatically built scenarios.
void validate_scenario(const Scenario& scenario);

// Shortest-path preference construction: \tilde t puts mass 1 on the nearest
// reachable feasible station (free-flow times), \tilde r marks the shortest
// path's edges. Deterministic tie-breaks: smaller distance, then smaller
// station list position; edge relaxation in edge order.
void assign_auto_preferences(const TransportNetwork& transport,
                             const std::vector<StationSpec>& stations,
                             EvProfile& ev);

struct GridCityParams {
  int rows = 0;
  int cols = 0;
  double spacing_km = 1.0;
  double speed_kmh = 30.0;
  double kappa_veh_per_km = 30.0;  // kappa_e = this * speed
  double road_cap = 160.0;
  double background_low = 55.0;
  double background_high = 150.0;
  std::uint64_t seed = 0;
};

// Deterministic rows x cols street grid; every adjacent pair of intersections
// gets two directed edges. Background flows are seeded uniform draws, one per
// directed edge in creation order.
TransportNetwork generate_grid_city(const GridCityParams& params);

struct PopulationParams {
  int count = 0;
  std::uint64_t seed = 0;
  double q_low = 20.0;
  double q_high = 70.0;
  double omega_low = 3.6;
  double omega_high = 14.4;
  double alpha = 0.5;
  double beta = 0.5;
};

// Deterministic EV population: per EV, in order, draw origin (uniform node),
// energy need, value of time; all stations are usable and preferences follow
// assign_auto_preferences.
std::vector<EvProfile> generate_population(const TransportNetwork& transport,
                                           const std::vector<StationSpec>& stations,
                                           const PopulationParams& params);

}  // namespace vgwe::net
