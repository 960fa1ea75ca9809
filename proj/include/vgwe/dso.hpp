#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "vgwe/diag_qp.hpp"
#include "vgwe/network.hpp"

// Distribution system operator. Its decision vector stacks, in order,
// generator active power p (kW), generator reactive power q (kvar), line
// active flow P, line reactive flow Q, and squared bus voltage v ((kV)^2).
//
// The operator's feasible set enforces reactive balance at every bus, the
// linearized voltage drop along every line (v_to = v_from - 2 r P - 2 x Q,
// exact in these units because impedances are stored in kilo-ohm), generator
// and voltage boxes, and an apparent-power disc per line. Active-power
// balance is deliberately NOT part of the set: it is priced, bus by bus,
// through multipliers lambda, and enters the operator's update only through
// the linear coupling gradient d(lambda' g)/dy.

namespace vgwe {

struct GridLayout {
  int n_gen = 0, n_line = 0, n_bus = 0;
  int dim() const { return 2 * n_gen + 2 * n_line + n_bus; }
  int p(int g) const { return g; }
  int q(int g) const { return n_gen + g; }
  int P(int l) const { return 2 * n_gen + l; }
  int Q(int l) const { return 2 * n_gen + n_line + l; }
  int v(int b) const { return 2 * n_gen + 2 * n_line + b; }
};

struct FeasibleSet {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b, lo, hi;
  std::vector<Disc> discs;
};

class Dso {
public:
  Dso(const net::DistributionNetwork& grid, const std::vector<net::StationSpec>& stations);

  const GridLayout& layout() const { return lay_; }
  int dim() const { return lay_.dim(); }
  const FeasibleSet& feasible_set() const { return set_; }

  // Nodal active-power imbalance, one entry per bus:
  //   sum(P out) - sum(P in) - sum(p gen) + station draw + base load.
  // Zero iff the bus balances; phi is the energy drawn per station (kWh over
  // the unit horizon, i.e. kW).
  Eigen::VectorXd active_imbalance(const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& phi) const;

  // Gradient of lambda' * active_imbalance with respect to y: -lambda at each
  // generator's p, lambda_from - lambda_to on each line's P, zero elsewhere.
  Eigen::VectorXd coupling_gradient(const Eigen::VectorXd& lambda) const;

  double generation_cost(const Eigen::VectorXd& y) const;
  Eigen::VectorXd generation_cost_gradient(const Eigen::VectorXd& y) const;

  // Per-station nodal energy price: lambda at the bus the station feeds from.
  Eigen::VectorXd station_prices(const Eigen::VectorXd& lambda) const;

  // argmin over the feasible set of 1/2|y - v|^2 + tau * generation cost.
  // tau = 0 is the plain projection. Warm-started across calls.
  Eigen::VectorXd prox(const Eigen::VectorXd& v, double tau);

  // Approximate dispatch from load-proportional generation and tree sweeps,
  // then projected onto the feasible set.
  Eigen::VectorXd cold_start();

  Eigen::VectorXd reactive_residual(const Eigen::VectorXd& y) const;
  Eigen::VectorXd voltage_residual(const Eigen::VectorXd& y) const;
  Eigen::VectorXd line_loading(const Eigen::VectorXd& y) const;

  const DiagQpResult& last_prox_stats() const { return last_prox_; }
  void configure_inner(double eps, int max_iter);

  const net::DistributionNetwork& grid() const { return grid_; }
  const std::vector<int>& station_bus() const { return station_bus_; }

private:
  void build_set();

  net::DistributionNetwork grid_;
  std::vector<int> station_bus_;
  GridLayout lay_;
  FeasibleSet set_;

  std::vector<std::vector<int>> lines_out_, lines_in_, gens_at_;
  std::vector<int> bfs_order_;  // root first, parents before children

  DiagQp engine_;
  double engine_tau_ = -1.0;
  double inner_eps_ = 1e-8;
  int inner_max_ = 10000;
  DiagQpResult last_prox_;
};

}  // namespace vgwe
