#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vgwe/network.hpp"

// Shared signals and the price-setting updates run by the network operators.
//
// Aggregates are always accumulated in vehicle-index order so a run is
// reproducible bit for bit.

namespace vgwe {

// sigma: per-edge traffic including background flow. delta: per-station
// vehicle mass. phi: per-station energy draw (sum of q_i * t_i).
struct AggregateSignal {
  Eigen::VectorXd sigma, delta, phi;
};

struct PriceSignal {
  Eigen::VectorXd nodal;           // per-bus energy price ($/kWh)
  Eigen::VectorXd road;            // per-edge toll ($)
  Eigen::VectorXd station_energy;  // per-station congestion surcharge ($/kWh)
};

// xs[i] is EV i's stacked [route; station] vector; qs[i] its battery demand.
AggregateSignal build_aggregates(const net::TransportNetwork& transport,
                                 const std::vector<net::StationSpec>& stations,
                                 const std::vector<Eigen::VectorXd>& xs,
                                 const Eigen::VectorXd& qs);

// Volume-delay travel time per edge: eta * (1 + pi * (sigma/kappa)^xi).
Eigen::VectorXd bpr_latency(const net::TransportNetwork& transport,
                            const Eigen::VectorXd& sigma);
Eigen::VectorXd bpr_latency_derivative(const net::TransportNetwork& transport,
                                       const Eigen::VectorXd& sigma);

// Per-vehicle queueing cost at each station: zeta * delta / (gamma * chargers).
Eigen::VectorXd station_congestion(const std::vector<net::StationSpec>& stations,
                                   const Eigen::VectorXd& delta);

// Reflected ascent on the bus energy prices; unconstrained in sign because it
// prices an equality.
Eigen::VectorXd nodal_price_update(const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& lambda_prev,
                                   const Eigen::VectorXd& imbalance_new,
                                   const Eigen::VectorXd& imbalance_old, double mu,
                                   double theta);

// Reflected projected ascent for a capacity coupling: usage above cap pushes
// the price up, slack pulls it toward zero, never below.
Eigen::VectorXd capacity_price_update(const Eigen::VectorXd& lambda,
                                      const Eigen::VectorXd& lambda_prev,
                                      const Eigen::VectorXd& usage_new,
                                      const Eigen::VectorXd& usage_old,
                                      const Eigen::VectorXd& cap, double mu, double theta);

}  // namespace vgwe
