#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vgwe/diag_qp.hpp"
#include "vgwe/dso.hpp"
#include "vgwe/ev_agent.hpp"
#include "vgwe/network.hpp"
#include "vgwe/operator_stack.hpp"

// Reference implementations used to check the production path. Everything
// here favors transparency over speed: dense linear algebra, two classical
// QP methods (primal active set, log-barrier interior point with a Newton
// polish), a plain two-projection extragradient solver for small instances,
// a monotonicity probe, and a KKT auditor. None of it shares iteration
// machinery with the accelerated dual engine used by the agents.

namespace vgwe::oracle {

struct QpProblem {
  Eigen::MatrixXd A;   // equality rows; may be 0 x n
  Eigen::VectorXd b;
  Eigen::VectorXd h;   // positive diagonal Hessian
  Eigen::VectorXd lin;
  Eigen::VectorXd lo, hi;       // +-inf allowed
  std::vector<Disc> discs;      // honored by the barrier backend only
};

// Primal active-set method for equality + box problems. z0 must satisfy the
// equalities and boxes exactly; each step re-solves a dense KKT system, adds
// the first blocking bound, and drops the worst mis-signed multiplier
// (lowest index on ties).
Eigen::VectorXd qp_active_set(const QpProblem& p, const Eigen::VectorXd& z0);

// Log-barrier interior point over the equality nullspace. Variables pinned
// by lo == hi are eliminated first; a phase-1 Newton search finds a strictly
// feasible start; a final KKT Newton polish sharpens the active constraints.
Eigen::VectorXd qp_barrier(const QpProblem& p);

// Convenience dispatch: active set when a feasible start is supplied and no
// discs are present, barrier otherwise.
Eigen::VectorXd qp_solve(const QpProblem& p, const Eigen::VectorXd* z0 = nullptr);

// One exact vertex of an EV's polytope per usable station: the breadth-first
// path from the EV's origin with the full split on that station.
std::vector<Eigen::VectorXd> ev_station_vertices(
    const net::TransportNetwork& transport,
    const std::vector<net::StationSpec>& stations, const net::EvProfile& ev);
Eigen::VectorXd ev_feasible_point(const net::TransportNetwork& transport,
                                  const std::vector<net::StationSpec>& stations,
                                  const net::EvProfile& ev);

// Reference prox/projection for one EV (active set) and the grid (barrier).
Eigen::VectorXd ev_prox_oracle(const net::TransportNetwork& transport,
                               const std::vector<net::StationSpec>& stations,
                               const net::EvProfile& ev, const Eigen::VectorXd& v,
                               double tau);
Eigen::VectorXd grid_prox_oracle(const Dso& dso, const Eigen::VectorXd& v, double tau);

struct ExtragradientOptions {
  double tol = 1e-8;       // unit-step fixed-point residual target
  int max_iters = 200000;
  double step0 = 1.0;
  int max_evs = 10;        // scale guard: this is a reference method
  int max_buses = 8;
};

struct ExtragradientResult {
  Eigen::VectorXd z;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

ExtragradientResult extragradient_solve(const net::Scenario& scenario,
                                        const ExtragradientOptions& opts = {});

struct ProbeResult {
  double min_inner = 0.0;       // min (T z1 - T z2) . (z1 - z2)
  double min_normalized = 0.0;  // same, divided by |z1 - z2|^2
};

ProbeResult monotonicity_probe(const net::Scenario& scenario, int n_pairs,
                               std::uint64_t seed);

struct KktReport {
  double ev_stationarity = 0.0;    // worst unit-step projected gradient gap
  double grid_stationarity = 0.0;
  double primal_feasibility = 0.0; // worst constraint violation, all families
  double dual_sign = 0.0;          // worst negative congestion price
  double comp_gap = 0.0;           // worst price times positive slack
  double overall() const;
};

KktReport kkt_audit(const net::Scenario& scenario, const Eigen::VectorXd& z);

}  // namespace vgwe::oracle
