#include "vgwe/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

#include "vgwe/rng.hpp"

namespace vgwe::net {

namespace {

std::string entity(const std::string& kind, int id) {
  return kind + " " + std::to_string(id);
}

[[noreturn]] void fail(const std::string& invariant, const std::string& who) {
  throw ValidationError(invariant + " (" + who + ")");
}

}  // namespace

std::vector<int> validate_radial(DistributionNetwork& grid) {
  const int n = static_cast<int>(grid.buses.size());
  if (n == 0) throw ValidationError("feeder has no buses");
  if (grid.substation < 0 || grid.substation >= n)
    throw ValidationError("feeder has no substation bus");
  if (static_cast<int>(grid.lines.size()) != n - 1)
    throw ValidationError("feeder not radial: " + std::to_string(grid.lines.size()) +
                          " lines for " + std::to_string(n) + " buses");

  std::vector<std::vector<int>> incident(n);  // line indices per bus
  for (int l = 0; l < static_cast<int>(grid.lines.size()); ++l) {
    const LineSpec& ln = grid.lines[l];
    incident[ln.from_bus].push_back(l);
    incident[ln.to_bus].push_back(l);
  }

  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  std::vector<int> via_line(n, -1);
  std::deque<int> frontier{grid.substation};
  seen[grid.substation] = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop_front();
    order.push_back(u);
    for (int l : incident[u]) {
      LineSpec& ln = grid.lines[l];
      int other = (ln.from_bus == u) ? ln.to_bus : ln.from_bus;
      if (!seen[other]) {
        seen[other] = 1;
        via_line[other] = l;
        if (ln.from_bus != u) std::swap(ln.from_bus, ln.to_bus);  // orient parent -> child
        frontier.push_back(other);
      } else if (via_line[u] != l) {
        fail("feeder not radial: cycle through line",
             entity("bus", grid.buses[u].id) + " - " + entity("bus", grid.buses[other].id));
      }
    }
  }
  if (static_cast<int>(order.size()) != n) {
    for (int j = 0; j < n; ++j)
      if (!seen[j]) fail("feeder not radial: bus disconnected from substation", entity("bus", grid.buses[j].id));
  }
  return order;
}

std::vector<char> reachable_nodes(const TransportNetwork& transport, int origin) {
  std::vector<std::vector<int>> out(transport.n_nodes);
  for (const RoadEdge& e : transport.edges) out[e.tail].push_back(e.head);
  std::vector<char> seen(transport.n_nodes, 0);
  std::deque<int> frontier{origin};
  seen[origin] = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop_front();
    for (int v : out[u])
      if (!seen[v]) {
        seen[v] = 1;
        frontier.push_back(v);
      }
  }
  return seen;
}

std::vector<std::string> reachability_check(const Scenario& scenario) {
  std::vector<std::string> warnings;
  for (const EvProfile& ev : scenario.evs) {
    std::vector<char> seen = reachable_nodes(scenario.transport, ev.origin);
    for (int d : ev.feasible) {
      if (!seen[scenario.stations[d].node]) {
        warnings.push_back("ev " + std::to_string(ev.id) + ": station " +
                           std::to_string(scenario.stations[d].id) +
                           " unreachable from origin; its share is pinned to zero");
      }
    }
  }
  return warnings;
}

void validate_scenario(const Scenario& scenario) {
  const TransportNetwork& tr = scenario.transport;
  const DistributionNetwork& gr = scenario.grid;
  const int E = static_cast<int>(tr.edges.size());
  const int D = static_cast<int>(scenario.stations.size());

  if (tr.bpr.pi < 0.0) fail("latency multiplier pi must be >= 0", "bpr");
  if (tr.bpr.xi < 0.0) fail("latency exponent xi must be >= 0", "bpr");
  if (tr.n_nodes <= 0) fail("transport network has no nodes", "transport");

  std::set<int> edge_ids;
  for (const RoadEdge& e : tr.edges) {
    const std::string who = entity("edge", e.id);
    if (!edge_ids.insert(e.id).second) fail("duplicate edge id", who);
    if (e.tail < 0 || e.tail >= tr.n_nodes || e.head < 0 || e.head >= tr.n_nodes)
      fail("edge endpoint refers to an unknown node", who);
    if (!(e.eta > 0.0)) fail("free-flow time eta must be > 0", who);
    if (!(e.kappa > 0.0)) fail("latency capacity kappa must be > 0", who);
    if (!(e.cap > 0.0)) fail("flow cap must be > 0", who);
    if (e.background < 0.0 || e.background > e.cap)
      fail("background flow must lie in [0, cap]", who);
  }

  int substations = 0;
  std::set<int> bus_ids;
  for (const BusSpec& b : gr.buses) {
    const std::string who = entity("bus", b.id);
    if (!bus_ids.insert(b.id).second) fail("duplicate bus id", who);
    if (!(b.v_min > 0.0) || !(b.v_min <= b.v_max))
      fail("voltage bounds must satisfy 0 < v_min <= v_max", who);
    if (b.is_substation) ++substations;
  }
  if (substations != 1)
    throw ValidationError("exactly one substation bus required, found " +
                          std::to_string(substations));

  for (const LineSpec& ln : gr.lines) {
    const std::string who = "line " + std::to_string(gr.buses[ln.from_bus].id) + "-" +
                            std::to_string(gr.buses[ln.to_bus].id);
    if (ln.r < 0.0 || ln.x < 0.0) fail("line impedance must be >= 0", who);
    if (!(ln.s_max > 0.0)) fail("line apparent-power cap must be > 0", who);
  }

  {
    DistributionNetwork copy = gr;  // validate_radial reorients; structure only
    validate_radial(copy);
  }

  std::set<int> gen_ids;
  for (const GeneratorSpec& g : gr.generators) {
    const std::string who = entity("generator", g.id);
    if (!gen_ids.insert(g.id).second) fail("duplicate generator id", who);
    if (g.bus < 0 || g.bus >= static_cast<int>(gr.buses.size()))
      fail("generator attached to unknown bus", who);
    if (!(g.a > 0.0)) fail("generation cost curvature a must be > 0", who);
    if (!(g.p_min <= g.p_max)) fail("active-power bounds must satisfy p_min <= p_max", who);
    if (!(g.q_min <= g.q_max)) fail("reactive-power bounds must satisfy q_min <= q_max", who);
  }

  std::set<int> station_ids;
  for (const StationSpec& s : scenario.stations) {
    const std::string who = entity("station", s.id);
    if (!station_ids.insert(s.id).second) fail("duplicate station id", who);
    if (s.node < 0 || s.node >= tr.n_nodes) fail("station placed at unknown transport node", who);
    if (s.bus < 0 || s.bus >= static_cast<int>(gr.buses.size()))
      fail("station attached to unknown bus", who);
    if (!(s.cap_energy > 0.0)) fail("station energy cap must be > 0", who);
    if (s.zeta < 0.0) fail("queueing price scale zeta must be >= 0", who);
    if (!(s.gamma > 0.0)) fail("service rate gamma must be > 0", who);
    if (s.chargers < 1) fail("station needs at least one charger", who);
  }

  std::set<int> ev_ids;
  for (const EvProfile& ev : scenario.evs) {
    const std::string who = entity("ev", ev.id);
    if (!ev_ids.insert(ev.id).second) fail("duplicate ev id", who);
    if (ev.origin < 0 || ev.origin >= tr.n_nodes) fail("ev origin is an unknown node", who);
    if (!(ev.q > 0.0)) fail("energy requirement q must be > 0", who);
    if (ev.omega < 0.0) fail("value of time omega must be >= 0", who);
    if (ev.alpha < 0.0 || ev.beta < 0.0) fail("preference weights must be >= 0", who);
    if (ev.feasible.empty()) fail("ev has no usable station", who);
    for (int d : ev.feasible)
      if (d < 0 || d >= D) fail("ev usable-station list refers to an unknown station", who);
    if (ev.pref_route.size() != E) fail("route preference has wrong dimension", who);
    if (ev.pref_station.size() != D) fail("station preference has wrong dimension", who);
    if (ev.pref_route.minCoeff() < 0.0 || ev.pref_route.maxCoeff() > 1.0)
      fail("route preference entries must lie in [0, 1]", who);
    double mass = 0.0;
    for (int d = 0; d < D; ++d) {
      double v = ev.pref_station[d];
      if (v < 0.0) fail("station preference entries must be >= 0", who);
      if (v > 0.0 && !std::binary_search(ev.feasible.begin(), ev.feasible.end(), d))
        fail("station preference puts mass outside the usable set", who);
      mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-9) fail("station preference must sum to 1", who);

    std::vector<char> seen = reachable_nodes(tr, ev.origin);
    bool any = false;
    for (int d : ev.feasible) any = any || seen[scenario.stations[d].node];
    if (!any) fail("no usable station reachable from origin", who);
  }
}

void assign_auto_preferences(const TransportNetwork& transport,
                             const std::vector<StationSpec>& stations, EvProfile& ev) {
  const int n = transport.n_nodes;
  const int E = static_cast<int>(transport.edges.size());
  const int D = static_cast<int>(stations.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Bellman-Ford style relaxation in fixed edge order: deterministic
  // predecessors independent of any priority-queue ordering.
  std::vector<double> dist(n, kInf);
  std::vector<int> pred_edge(n, -1);
  dist[ev.origin] = 0.0;
  for (int pass = 0; pass < n; ++pass) {
    bool changed = false;
    for (int e = 0; e < E; ++e) {
      const RoadEdge& edge = transport.edges[e];
      if (dist[edge.tail] + edge.eta < dist[edge.head] - 1e-15) {
        dist[edge.head] = dist[edge.tail] + edge.eta;
        pred_edge[edge.head] = e;
        changed = true;
      }
    }
    if (!changed) break;
  }

  int best = -1;
  double best_dist = kInf;
  for (int d : ev.feasible) {
    double dd = dist[stations[d].node];
    if (dd < best_dist - 1e-15) {
      best_dist = dd;
      best = d;
    }
  }

  ev.pref_route = Eigen::VectorXd::Zero(E);
  ev.pref_station = Eigen::VectorXd::Zero(D);
  if (best < 0) return;  // nothing reachable; validation rejects this later
  ev.pref_station[best] = 1.0;
  for (int v = stations[best].node; v != ev.origin && pred_edge[v] >= 0;) {
    int e = pred_edge[v];
    ev.pref_route[e] = 1.0;
    v = transport.edges[e].tail;
  }
}

}  // namespace vgwe::net
