#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "vgwe/diag_qp.hpp"
#include "vgwe/network.hpp"

// Per-vehicle decision model. Each EV chooses a route flow r in [0,1]^E and a
// station split t on the simplex over its usable stations; the stacked vector
// x = [r; t] lives in a flow polytope: at every road node, inflow minus
// outflow minus the share absorbed by a co-located station equals -1 at the
// EV's origin and 0 elsewhere. Summing the rows shows the splits add to one,
// so no explicit simplex row is needed, and stations the EV cannot use (not
// in its feasible list, or unreachable from its origin) are pinned to zero.

namespace vgwe {

struct LocalPolytope {
  Eigen::SparseMatrix<double> A;  // node rows over [route; station] coords
  Eigen::VectorXd b;
  Eigen::VectorXd lo, hi;
};

LocalPolytope build_local_polytope(const net::TransportNetwork& transport,
                                   const std::vector<net::StationSpec>& stations,
                                   const net::EvProfile& ev);

class EvAgent {
public:
  EvAgent(const net::TransportNetwork& transport,
          const std::vector<net::StationSpec>& stations, const net::EvProfile& ev);

  int id() const { return id_; }
  double charge_energy() const { return q_; }
  double route_weight() const { return alpha_; }
  double station_weight() const { return beta_; }
  int n_route() const { return n_route_; }
  int n_station() const { return n_station_; }
  int dim() const { return n_route_ + n_station_; }

  // Stacked ideal point [route preference; station preference].
  const Eigen::VectorXd& preference() const { return pref_; }
  const LocalPolytope& polytope() const { return poly_; }

  // Cost of travel felt through the aggregates: [omega * latency; congestion].
  // Both inputs are common to all EVs and are passed precomputed.
  Eigen::VectorXd travel_gradient(const Eigen::VectorXd& latency,
                                  const Eigen::VectorXd& congestion) const;

  // Cost of posted prices: [road tolls; q * (station energy + nodal energy)].
  Eigen::VectorXd price_gradient(const Eigen::VectorXd& road_toll,
                                 const Eigen::VectorXd& station_energy_price) const;

  // Deviation penalty gradient [alpha (r - r~); beta (t - t~)].
  Eigen::VectorXd preference_gradient(const Eigen::VectorXd& x) const;

  // Full own-cost gradient with the aggregate maps held fixed.
  Eigen::VectorXd own_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& latency,
                               const Eigen::VectorXd& congestion,
                               const Eigen::VectorXd& road_toll,
                               const Eigen::VectorXd& station_energy_price) const;

  double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& latency,
              const Eigen::VectorXd& congestion, const Eigen::VectorXd& road_toll,
              const Eigen::VectorXd& station_energy_price) const;

  // argmin over the polytope of  1/2|z - v|^2 + tau * deviation penalty.
  // tau = 0 is the plain projection. Warm-started across calls.
  Eigen::VectorXd prox(const Eigen::VectorXd& v, double tau);

  const DiagQpResult& last_prox_stats() const { return last_prox_; }
  void configure_inner(double eps, int max_iter);

private:
  int id_ = 0;
  int n_route_ = 0, n_station_ = 0;
  double q_ = 0.0, omega_ = 0.0, alpha_ = 0.0, beta_ = 0.0;
  Eigen::VectorXd pref_;
  LocalPolytope poly_;

  DiagQp engine_;
  double engine_tau_ = -1.0;
  double inner_eps_ = 1e-8;
  int inner_max_ = 10000;
  DiagQpResult last_prox_;
};

}  // namespace vgwe
