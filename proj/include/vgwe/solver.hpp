#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vgwe/network.hpp"
#include "vgwe/operator_stack.hpp"

// Equilibrium solver. Each iteration sweeps once through the players:
//
//   1. Every EV takes a forward step along a reflected travel-cost gradient
//      (twice the current aggregate cost minus the previous one) plus the
//      posted prices, adds inertia, and resolves its prox over its polytope.
//   2. The grid operator steps along the price-coupling gradient with
//      inertia and resolves its cost-aware projection.
//   3. Prices ascend on reflected constraint values: bus energy prices move
//      with the nodal imbalance (sign-free), road tolls and station
//      surcharges with capacity excess (clipped at zero).
//
// The reflected evaluations make a single sweep per iteration sufficient;
// no player needs an inner equilibrium loop. With the inertia weight theta
// in [0, 1/3) and steps below the operator's Lipschitz threshold the sweep
// converges to a variational equilibrium of the coupled game.

namespace vgwe {

struct SolverConfig {
  double tau = 0.0;         // EV prox step; 0 = derive from a Lipschitz probe
  double tau0 = 0.0;        // grid-operator step; 0 = same as tau
  double mu = 0.0;          // base dual step; 0 = same as tau
  double mu_nodal = 0.0;    // per-family overrides; 0 = mu
  double mu_road = 0.0;
  double mu_station = 0.0;
  double theta = 0.25;      // inertia in [0, 1/3)
  double eps_primal = 1e-6; // max iterate movement
  double eps_feas = 1e-4;   // max constraint violation (kW scale)
  double eps_dual = 1e-4;   // max price-times-slack gap
  double eps_inner = 1e-8;
  int max_iters = 200000;
  int max_inner = 10000;
  std::uint64_t seed = 1;
  bool station_price_lag = false;  // EVs see last iteration's bus prices
  bool freeze_duals = false;       // hold all prices fixed (testing hook)
  int trace_every = 0;             // 0 = keep no trace
};

SolverConfig resolve_config(const net::SolverSettings& s);

struct ViolationReport {
  double road_excess = 0.0;     // max positive traffic over cap
  double station_excess = 0.0;  // max positive energy over cap
  double imbalance = 0.0;       // max absolute bus imbalance
  double comp_gap = 0.0;        // max price * positive slack
  std::vector<int> binding_roads, binding_stations;  // positive price
  std::vector<int> over_roads, over_stations;        // usage above cap
};

struct TraceRow {
  int iter = 0;
  double step_delta = 0.0;
  double imbalance = 0.0;
  double road_excess = 0.0;
  double station_excess = 0.0;
  double comp_gap = 0.0;
  double generation_cost = 0.0;
  Eigen::VectorXd gen_p;            // per-generator active dispatch
  Eigen::VectorXd station_demand;   // per-station energy drawn
  Eigen::VectorXd road_tolls, station_prices, nodal_prices;
};

// Three-part stopping rule: the sweep moved less than eps_primal, every
// shared constraint holds within eps_feas, and no positive price rides a
// slack constraint beyond eps_dual. detail spells out what failed, naming
// the offending stations, roads, or buses by id.
struct ConvergenceCheck {
  bool step_ok = false;
  bool feasible = false;
  bool complementary = false;
  std::string detail;
  bool converged() const { return step_ok && feasible && complementary; }
};

ConvergenceCheck check_convergence(const OperatorStack& op, const Eigen::VectorXd& z,
                                   double step_delta, const SolverConfig& config);

struct SolveStats {
  bool converged = false;
  int iterations = 0;
  double step_delta = 0.0;       // last max iterate movement
  double natural_residual = 0.0; // unit-step fixed-point gap at the answer
  double lipschitz_estimate = 0.0;
  int inner_failures = 0;        // prox calls that hit their iteration cap
  double inner_worst_residual = 0.0;
};

struct EquilibriumResult {
  Eigen::VectorXd z;
  SolverConfig used;  // fully resolved numeric configuration
  SolveStats stats;
  ViolationReport violation;
  std::vector<TraceRow> trace;
};

// Largest per-coordinate gap of the unit-step fixed-point map: every block
// takes one plain-priced step and re-projects; zero exactly at equilibrium.
double natural_residual(OperatorStack& op, const Eigen::VectorXd& z);

// Max ratio |T z1 - T z2| / |z1 - z2| over sampled feasible pairs, sharpened
// by a finite-difference power iteration around the strongest pair.
double estimate_lipschitz(OperatorStack& op, std::uint64_t seed, int n_pairs = 12,
                          int n_power = 30);

ViolationReport measure_violation(const OperatorStack& op, const Eigen::VectorXd& z);

EquilibriumResult solve_equilibrium(const net::Scenario& scenario,
                                    const SolverConfig& config);

}  // namespace vgwe
