#include <numeric>

#include "vgwe/network.hpp"
#include "vgwe/rng.hpp"

namespace vgwe::net {

TransportNetwork generate_grid_city(const GridCityParams& params) {
  if (params.rows < 1 || params.cols < 1)
    throw ValidationError("grid city needs rows >= 1 and cols >= 1");
  if (params.rows * params.cols < 2)
    throw ValidationError("grid city needs at least two intersections");

  TransportNetwork tr;
  tr.n_nodes = params.rows * params.cols;
  tr.node_ids.resize(tr.n_nodes);
  std::iota(tr.node_ids.begin(), tr.node_ids.end(), 1);

  const double eta = params.spacing_km / params.speed_kmh;
  const double kappa = params.kappa_veh_per_km * params.speed_kmh;
  DetRng rng(params.seed);
  auto add_pair = [&](int u, int v) {
    for (int dir = 0; dir < 2; ++dir) {
      RoadEdge e;
      e.id = static_cast<int>(tr.edges.size()) + 1;
      e.tail = dir == 0 ? u : v;
      e.head = dir == 0 ? v : u;
      e.eta = eta;
      e.kappa = kappa;
      e.cap = params.road_cap;
      e.background = rng.uniform(params.background_low, params.background_high);
      tr.edges.push_back(e);
    }
  };
  for (int r = 0; r < params.rows; ++r) {
    for (int c = 0; c < params.cols; ++c) {
      int u = r * params.cols + c;
      if (c + 1 < params.cols) add_pair(u, u + 1);
      if (r + 1 < params.rows) add_pair(u, u + params.cols);
    }
  }
  return tr;
}

std::vector<EvProfile> generate_population(const TransportNetwork& transport,
                                           const std::vector<StationSpec>& stations,
                                           const PopulationParams& params) {
  DetRng rng(params.seed);
  std::vector<EvProfile> evs;
  evs.reserve(params.count);
  for (int i = 0; i < params.count; ++i) {
    EvProfile ev;
    ev.id = i + 1;
    ev.origin = rng.uniform_int(transport.n_nodes);
    ev.q = rng.uniform(params.q_low, params.q_high);
    ev.omega = rng.uniform(params.omega_low, params.omega_high);
    ev.alpha = params.alpha;
    ev.beta = params.beta;
    ev.feasible.resize(stations.size());
    std::iota(ev.feasible.begin(), ev.feasible.end(), 0);
    assign_auto_preferences(transport, stations, ev);
    evs.push_back(std::move(ev));
  }
  return evs;
}

}  // namespace vgwe::net
