#include "vgwe/ev_agent.hpp"

#include <algorithm>
#include <vector>

namespace vgwe {

LocalPolytope build_local_polytope(const net::TransportNetwork& transport,
                                   const std::vector<net::StationSpec>& stations,
                                   const net::EvProfile& ev) {
  const int E = static_cast<int>(transport.edges.size());
  const int D = static_cast<int>(stations.size());
  const int N = transport.n_nodes;

  LocalPolytope poly;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * E + D);
  for (int e = 0; e < E; ++e) {
    trips.emplace_back(transport.edges[e].head, e, 1.0);   // inflow
    trips.emplace_back(transport.edges[e].tail, e, -1.0);  // outflow
  }
  for (int d = 0; d < D; ++d) trips.emplace_back(stations[d].node, E + d, -1.0);
  poly.A.resize(N, E + D);
  poly.A.setFromTriplets(trips.begin(), trips.end());

  poly.b = Eigen::VectorXd::Zero(N);
  poly.b[ev.origin] = -1.0;

  poly.lo = Eigen::VectorXd::Zero(E + D);
  poly.hi = Eigen::VectorXd::Ones(E + D);
  const std::vector<char> reach = net::reachable_nodes(transport, ev.origin);
  for (int d = 0; d < D; ++d) {
    const bool usable = std::binary_search(ev.feasible.begin(), ev.feasible.end(), d) &&
                        reach[stations[d].node];
    if (!usable) poly.hi[E + d] = 0.0;
  }
  return poly;
}

EvAgent::EvAgent(const net::TransportNetwork& transport,
                 const std::vector<net::StationSpec>& stations, const net::EvProfile& ev)
    : id_(ev.id),
      n_route_(static_cast<int>(transport.edges.size())),
      n_station_(static_cast<int>(stations.size())),
      q_(ev.q),
      omega_(ev.omega),
      alpha_(ev.alpha),
      beta_(ev.beta),
      poly_(build_local_polytope(transport, stations, ev)) {
  pref_.resize(dim());
  pref_ << ev.pref_route, ev.pref_station;
  engine_.setup(poly_.A, Eigen::VectorXd::Ones(dim()), poly_.lo, poly_.hi);
  engine_tau_ = 0.0;
}

void EvAgent::configure_inner(double eps, int max_iter) {
  inner_eps_ = eps;
  inner_max_ = max_iter;
}

Eigen::VectorXd EvAgent::travel_gradient(const Eigen::VectorXd& latency,
                                         const Eigen::VectorXd& congestion) const {
  Eigen::VectorXd g(dim());
  g.head(n_route_) = omega_ * latency;
  g.tail(n_station_) = congestion;
  return g;
}

Eigen::VectorXd EvAgent::price_gradient(
    const Eigen::VectorXd& road_toll, const Eigen::VectorXd& station_energy_price) const {
  Eigen::VectorXd g(dim());
  g.head(n_route_) = road_toll;
  g.tail(n_station_) = q_ * station_energy_price;
  return g;
}

Eigen::VectorXd EvAgent::preference_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = x - pref_;
  g.head(n_route_) *= alpha_;
  g.tail(n_station_) *= beta_;
  return g;
}

Eigen::VectorXd EvAgent::own_gradient(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& latency,
                                      const Eigen::VectorXd& congestion,
                                      const Eigen::VectorXd& road_toll,
                                      const Eigen::VectorXd& station_energy_price) const {
  return preference_gradient(x) + travel_gradient(latency, congestion) +
         price_gradient(road_toll, station_energy_price);
}

double EvAgent::cost(const Eigen::VectorXd& x, const Eigen::VectorXd& latency,
                     const Eigen::VectorXd& congestion, const Eigen::VectorXd& road_toll,
                     const Eigen::VectorXd& station_energy_price) const {
  const auto r = x.head(n_route_);
  const auto t = x.tail(n_station_);
  const auto r0 = pref_.head(n_route_);
  const auto t0 = pref_.tail(n_station_);
  double c = 0.5 * alpha_ * (r - r0).squaredNorm() + 0.5 * beta_ * (t - t0).squaredNorm();
  c += (omega_ * latency + road_toll).dot(r);
  c += (congestion + q_ * station_energy_price).dot(t);
  return c;
}

Eigen::VectorXd EvAgent::prox(const Eigen::VectorXd& v, double tau) {
  // argmin 1/2|z-v|^2 + tau(alpha/2 |r-r~|^2 + beta/2 |t-t~|^2) over the
  // polytope: diagonal curvature 1 + tau*alpha (routes), 1 + tau*beta
  // (splits); linear term -(v + tau * weight * pref).
  if (tau != engine_tau_) {
    Eigen::VectorXd h(dim());
    h.head(n_route_).setConstant(1.0 + tau * alpha_);
    h.tail(n_station_).setConstant(1.0 + tau * beta_);
    engine_.set_h(h);
    engine_tau_ = tau;
  }
  Eigen::VectorXd lin = -v;
  lin.head(n_route_) -= tau * alpha_ * pref_.head(n_route_);
  lin.tail(n_station_) -= tau * beta_ * pref_.tail(n_station_);
  last_prox_ = engine_.solve(lin, poly_.b, inner_eps_, inner_max_);
  return engine_.z();
}

}  // namespace vgwe
