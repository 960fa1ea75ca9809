#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vgwe/coordinators.hpp"
#include "vgwe/dso.hpp"
#include "vgwe/ev_agent.hpp"
#include "vgwe/network.hpp"
#include "vgwe/rng.hpp"

// The full game state stacks every EV's [route; station] block, the grid
// operator's dispatch, and three price families: nodal energy prices (one per
// bus, signed), road tolls (one per edge, nonnegative), and station capacity
// surcharges (one per station, nonnegative).
//
// apply() evaluates the game map whose zeros-with-normal-cone condition
// defines the equilibrium: each EV's own-cost gradient with the aggregate
// maps held fixed, the operator's cost-plus-coupling gradient, the negated
// bus imbalance for the nodal prices, and remaining capacity slack for the
// two congestion price families.

namespace vgwe {

struct ZLayout {
  int n_ev = 0, n_edge = 0, n_station = 0, n_bus = 0, y_dim = 0;
  int ev_dim() const { return n_edge + n_station; }
  int ev(int i) const { return i * ev_dim(); }
  int y() const { return n_ev * ev_dim(); }
  int nodal() const { return y() + y_dim; }
  int road() const { return nodal() + n_bus; }
  int station() const { return road() + n_edge; }
  int dim() const { return station() + n_station; }
};

class OperatorStack {
public:
  explicit OperatorStack(const net::Scenario& scenario);

  const ZLayout& layout() const { return lay_; }
  std::vector<EvAgent>& agents() { return agents_; }
  const std::vector<EvAgent>& agents() const { return agents_; }
  Dso& dso() { return dso_; }
  const Dso& dso() const { return dso_; }
  const net::TransportNetwork& transport() const { return transport_; }
  const std::vector<net::StationSpec>& stations() const { return stations_; }
  const Eigen::VectorXd& road_caps() const { return road_caps_; }
  const Eigen::VectorXd& station_caps() const { return station_caps_; }
  const Eigen::VectorXd& charge_demands() const { return qs_; }

  Eigen::VectorBlock<const Eigen::VectorXd> ev_x(const Eigen::VectorXd& z, int i) const {
    return z.segment(lay_.ev(i), lay_.ev_dim());
  }
  Eigen::VectorBlock<const Eigen::VectorXd> y(const Eigen::VectorXd& z) const {
    return z.segment(lay_.y(), lay_.y_dim);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> nodal(const Eigen::VectorXd& z) const {
    return z.segment(lay_.nodal(), lay_.n_bus);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> road(const Eigen::VectorXd& z) const {
    return z.segment(lay_.road(), lay_.n_edge);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> station(const Eigen::VectorXd& z) const {
    return z.segment(lay_.station(), lay_.n_station);
  }

  AggregateSignal aggregates(const Eigen::VectorXd& z) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const;

  // A point with every primal block feasible and small nonnegative prices;
  // used to probe operator behavior over the relevant region.
  Eigen::VectorXd sample_point(DetRng& rng, double price_scale = 1.0);

private:
  net::TransportNetwork transport_;
  std::vector<net::StationSpec> stations_;
  std::vector<EvAgent> agents_;
  Dso dso_;
  Eigen::VectorXd road_caps_, station_caps_, qs_;
  ZLayout lay_;
};

}  // namespace vgwe
