#include "vgwe/operator_stack.hpp"

#include <cmath>

namespace vgwe {

OperatorStack::OperatorStack(const net::Scenario& scenario)
    : transport_(scenario.transport),
      stations_(scenario.stations),
      dso_(scenario.grid, scenario.stations) {
  agents_.reserve(scenario.evs.size());
  for (const auto& ev : scenario.evs) agents_.emplace_back(transport_, stations_, ev);

  const int E = static_cast<int>(transport_.edges.size());
  const int D = static_cast<int>(stations_.size());
  road_caps_.resize(E);
  for (int e = 0; e < E; ++e) road_caps_[e] = transport_.edges[e].cap;
  station_caps_.resize(D);
  for (int d = 0; d < D; ++d) station_caps_[d] = stations_[d].cap_energy;
  qs_.resize(static_cast<Eigen::Index>(agents_.size()));
  for (size_t i = 0; i < agents_.size(); ++i)
    qs_[static_cast<Eigen::Index>(i)] = agents_[i].charge_energy();

  lay_.n_ev = static_cast<int>(agents_.size());
  lay_.n_edge = E;
  lay_.n_station = D;
  lay_.n_bus = static_cast<int>(scenario.grid.buses.size());
  lay_.y_dim = dso_.dim();
}

AggregateSignal OperatorStack::aggregates(const Eigen::VectorXd& z) const {
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(agents_.size());
  for (int i = 0; i < lay_.n_ev; ++i) xs.emplace_back(ev_x(z, i));
  return build_aggregates(transport_, stations_, xs, qs_);
}

Eigen::VectorXd OperatorStack::apply(const Eigen::VectorXd& z) const {
  const AggregateSignal agg = aggregates(z);
  const Eigen::VectorXd latency = bpr_latency(transport_, agg.sigma);
  const Eigen::VectorXd congestion = station_congestion(stations_, agg.delta);
  const Eigen::VectorXd lambda_nodal = nodal(z);
  const Eigen::VectorXd energy_price = station(z) + dso_.station_prices(lambda_nodal);

  Eigen::VectorXd out(lay_.dim());
  for (int i = 0; i < lay_.n_ev; ++i)
    out.segment(lay_.ev(i), lay_.ev_dim()) =
        agents_[i].own_gradient(ev_x(z, i), latency, congestion, road(z), energy_price);

  out.segment(lay_.y(), lay_.y_dim) =
      dso_.generation_cost_gradient(y(z)) + dso_.coupling_gradient(lambda_nodal);

  out.segment(lay_.nodal(), lay_.n_bus) = -dso_.active_imbalance(y(z), agg.phi);
  out.segment(lay_.road(), lay_.n_edge) = road_caps_ - agg.sigma;
  out.segment(lay_.station(), lay_.n_station) = station_caps_ - agg.phi;
  return out;
}

Eigen::VectorXd OperatorStack::sample_point(DetRng& rng, double price_scale) {
  Eigen::VectorXd z(lay_.dim());
  Eigen::VectorXd v(lay_.ev_dim());
  for (int i = 0; i < lay_.n_ev; ++i) {
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = rng.uniform(-0.5, 1.5);
    z.segment(lay_.ev(i), lay_.ev_dim()) = agents_[i].prox(v, 0.0);
  }
  Eigen::VectorXd w(lay_.y_dim);
  const auto& set = dso_.feasible_set();
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    double lo = set.lo[k], hi = set.hi[k];
    if (!std::isfinite(lo)) lo = -1000.0;
    if (!std::isfinite(hi)) hi = 1000.0;
    w[k] = rng.uniform(lo, hi);
  }
  z.segment(lay_.y(), lay_.y_dim) = dso_.prox(w, 0.0);
  for (int b = 0; b < lay_.n_bus; ++b)
    z[lay_.nodal() + b] = price_scale * rng.uniform(-1.0, 1.0);
  for (int e = 0; e < lay_.n_edge; ++e)
    z[lay_.road() + e] = price_scale * rng.uniform(0.0, 1.0);
  for (int d = 0; d < lay_.n_station; ++d)
    z[lay_.station() + d] = price_scale * rng.uniform(0.0, 1.0);
  return z;
}

}  // namespace vgwe
