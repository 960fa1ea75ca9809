#include "vgwe/coordinators.hpp"

#include <cmath>
#include <stdexcept>

namespace vgwe {

AggregateSignal build_aggregates(const net::TransportNetwork& transport,
                                 const std::vector<net::StationSpec>& stations,
                                 const std::vector<Eigen::VectorXd>& xs,
                                 const Eigen::VectorXd& qs) {
  const int E = static_cast<int>(transport.edges.size());
  const int D = static_cast<int>(stations.size());
  if (qs.size() != static_cast<Eigen::Index>(xs.size()))
    throw std::invalid_argument("build_aggregates: qs/xs mismatch");

  AggregateSignal agg;
  agg.sigma.resize(E);
  for (int e = 0; e < E; ++e) agg.sigma[e] = transport.edges[e].background;
  agg.delta = Eigen::VectorXd::Zero(D);
  agg.phi = Eigen::VectorXd::Zero(D);
  for (size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != E + D)
      throw std::invalid_argument("build_aggregates: bad decision size");
    agg.sigma += xs[i].head(E);
    agg.delta += xs[i].tail(D);
    agg.phi += qs[static_cast<Eigen::Index>(i)] * xs[i].tail(D);
  }
  return agg;
}

Eigen::VectorXd bpr_latency(const net::TransportNetwork& transport,
                            const Eigen::VectorXd& sigma) {
  const int E = static_cast<int>(transport.edges.size());
  Eigen::VectorXd l(E);
  for (int e = 0; e < E; ++e) {
    const auto& ed = transport.edges[e];
    l[e] = ed.eta * (1.0 + transport.bpr.pi *
                               std::pow(sigma[e] / ed.kappa, transport.bpr.xi));
  }
  return l;
}

Eigen::VectorXd bpr_latency_derivative(const net::TransportNetwork& transport,
                                       const Eigen::VectorXd& sigma) {
  const int E = static_cast<int>(transport.edges.size());
  Eigen::VectorXd g(E);
  for (int e = 0; e < E; ++e) {
    const auto& ed = transport.edges[e];
    g[e] = ed.eta * transport.bpr.pi * transport.bpr.xi *
           std::pow(sigma[e] / ed.kappa, transport.bpr.xi - 1.0) / ed.kappa;
  }
  return g;
}

Eigen::VectorXd station_congestion(const std::vector<net::StationSpec>& stations,
                                   const Eigen::VectorXd& delta) {
  const int D = static_cast<int>(stations.size());
  Eigen::VectorXd psi(D);
  for (int d = 0; d < D; ++d) {
    const auto& st = stations[d];
    psi[d] = st.zeta * delta[d] / (st.gamma * static_cast<double>(st.chargers));
  }
  return psi;
}

Eigen::VectorXd nodal_price_update(const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& lambda_prev,
                                   const Eigen::VectorXd& imbalance_new,
                                   const Eigen::VectorXd& imbalance_old, double mu,
                                   double theta) {
  return lambda + mu * (2.0 * imbalance_new - imbalance_old) +
         theta * (lambda - lambda_prev);
}

Eigen::VectorXd capacity_price_update(const Eigen::VectorXd& lambda,
                                      const Eigen::VectorXd& lambda_prev,
                                      const Eigen::VectorXd& usage_new,
                                      const Eigen::VectorXd& usage_old,
                                      const Eigen::VectorXd& cap, double mu,
                                      double theta) {
  Eigen::VectorXd out = lambda + mu * (2.0 * usage_new - usage_old - cap) +
                        theta * (lambda - lambda_prev);
  return out.cwiseMax(0.0);
}

}  // namespace vgwe
