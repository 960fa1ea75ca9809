#include "vgwe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "vgwe/coordinators.hpp"
#include "vgwe/rng.hpp"

namespace vgwe::oracle {

namespace {

// Breadth-first predecessor-edge tree from the origin, edges scanned in
// declaration order so the tree is reproducible.
std::vector<int> bfs_pred_edge(const net::TransportNetwork& transport, int origin) {
  const int N = transport.n_nodes;
  const int E = static_cast<int>(transport.edges.size());
  std::vector<std::vector<int>> out(N);
  for (int e = 0; e < E; ++e) out[transport.edges[e].tail].push_back(e);
  std::vector<int> pred(N, -1);
  std::vector<char> seen(N, 0);
  seen[origin] = 1;
  std::deque<int> queue{origin};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int e : out[u]) {
      const int v = transport.edges[e].head;
      if (!seen[v]) {
        seen[v] = 1;
        pred[v] = e;
        queue.push_back(v);
      }
    }
  }
  return pred;
}

}  // namespace

std::vector<Eigen::VectorXd> ev_station_vertices(
    const net::TransportNetwork& transport,
    const std::vector<net::StationSpec>& stations, const net::EvProfile& ev) {
  const int E = static_cast<int>(transport.edges.size());
  const int D = static_cast<int>(stations.size());
  const std::vector<int> pred = bfs_pred_edge(transport, ev.origin);
  const std::vector<char> reach = net::reachable_nodes(transport, ev.origin);

  std::vector<Eigen::VectorXd> verts;
  for (int d = 0; d < D; ++d) {
    if (!std::binary_search(ev.feasible.begin(), ev.feasible.end(), d)) continue;
    if (!reach[stations[d].node]) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(E + D);
    x[E + d] = 1.0;
    for (int node = stations[d].node; node != ev.origin;) {
      const int e = pred[node];
      x[e] = 1.0;
      node = transport.edges[e].tail;
    }
    verts.push_back(std::move(x));
  }
  if (verts.empty())
    throw std::invalid_argument("ev_station_vertices: no usable station");
  return verts;
}

Eigen::VectorXd ev_feasible_point(const net::TransportNetwork& transport,
                                  const std::vector<net::StationSpec>& stations,
                                  const net::EvProfile& ev) {
  // Shortest vertex by hop count: fewest route edges, ties to the lower id.
  const auto verts = ev_station_vertices(transport, stations, ev);
  const int E = static_cast<int>(transport.edges.size());
  size_t best = 0;
  double best_hops = verts[0].head(E).sum();
  for (size_t i = 1; i < verts.size(); ++i) {
    const double hops = verts[i].head(E).sum();
    if (hops < best_hops) {
      best_hops = hops;
      best = i;
    }
  }
  return verts[best];
}

Eigen::VectorXd ev_prox_oracle(const net::TransportNetwork& transport,
                               const std::vector<net::StationSpec>& stations,
                               const net::EvProfile& ev, const Eigen::VectorXd& v,
                               double tau) {
  const LocalPolytope poly = build_local_polytope(transport, stations, ev);
  const int E = static_cast<int>(transport.edges.size());
  const int D = static_cast<int>(stations.size());

  QpProblem p;
  p.A = Eigen::MatrixXd(poly.A);
  p.b = poly.b;
  p.lo = poly.lo;
  p.hi = poly.hi;
  p.h.resize(E + D);
  p.h.head(E).setConstant(1.0 + tau * ev.alpha);
  p.h.tail(D).setConstant(1.0 + tau * ev.beta);
  p.lin = -v;
  p.lin.head(E) -= tau * ev.alpha * ev.pref_route;
  p.lin.tail(D) -= tau * ev.beta * ev.pref_station;

  const Eigen::VectorXd z0 = ev_feasible_point(transport, stations, ev);
  return qp_active_set(p, z0);
}

Eigen::VectorXd grid_prox_oracle(const Dso& dso, const Eigen::VectorXd& v, double tau) {
  const FeasibleSet& set = dso.feasible_set();
  const auto& lay = dso.layout();

  QpProblem p;
  p.A = Eigen::MatrixXd(set.A);
  p.b = set.b;
  p.lo = set.lo;
  p.hi = set.hi;
  p.discs = set.discs;
  p.h = Eigen::VectorXd::Ones(dso.dim());
  p.lin = -v;
  for (int g = 0; g < lay.n_gen; ++g) {
    p.h[lay.p(g)] = 1.0 + 2.0 * tau * dso.grid().generators[g].a;
    p.lin[lay.p(g)] += tau * dso.grid().generators[g].b;
  }
  return qp_barrier(p);
}

namespace {

struct EgProjector {
  OperatorStack& op;
  // Prebuilt per-EV polytopes; the feasible x blocks double as warm starts
  // for the active-set projections.
  std::vector<QpProblem> ev_qps;
  std::vector<Eigen::VectorXd> x_warm;
  // Grid projection, posed twice: without discs for the warm active-set fast
  // path, and with them for the barrier fallback when a disc binds.
  QpProblem grid_qp, grid_qp_discs;
  Eigen::VectorXd y_warm;

  explicit EgProjector(OperatorStack& stack, const net::Scenario& sc) : op(stack) {
    const auto& lay = op.layout();
    for (const auto& ev : sc.evs) {
      const LocalPolytope poly = build_local_polytope(sc.transport, sc.stations, ev);
      QpProblem p;
      p.A = Eigen::MatrixXd(poly.A);
      p.b = poly.b;
      p.lo = poly.lo;
      p.hi = poly.hi;
      p.h = Eigen::VectorXd::Ones(lay.ev_dim());
      ev_qps.push_back(std::move(p));
      x_warm.push_back(ev_feasible_point(sc.transport, sc.stations, ev));
    }

    const FeasibleSet& set = op.dso().feasible_set();
    grid_qp.A = Eigen::MatrixXd(set.A);
    grid_qp.b = set.b;
    grid_qp.lo = set.lo;
    grid_qp.hi = set.hi;
    grid_qp.h = Eigen::VectorXd::Ones(lay.y_dim);
    grid_qp_discs = grid_qp;
    grid_qp_discs.discs = set.discs;
    y_warm = grid_prox_oracle(op.dso(), Eigen::VectorXd::Zero(lay.y_dim), 0.0);
  }

  Eigen::VectorXd project_grid(const Eigen::VectorXd& w_y) {
    grid_qp.lin = -w_y;
    // Barrier outputs can overshoot a box by strictly less than the active
    // set's start tolerance; clamping perturbs the equalities by even less.
    y_warm = y_warm.cwiseMax(grid_qp.lo).cwiseMin(grid_qp.hi);
    Eigen::VectorXd y = qp_active_set(grid_qp, y_warm);
    // The disc-free answer is exact whenever every disc holds at it.
    for (const Disc& disc : grid_qp_discs.discs) {
      const double rr = y[disc.a] * y[disc.a] + y[disc.b] * y[disc.b];
      if (rr > disc.radius * disc.radius * (1.0 + 1e-12) + 1e-12) {
        grid_qp_discs.lin = -w_y;
        y = qp_barrier(grid_qp_discs);
        break;
      }
    }
    y_warm = y;
    return y;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& w) {
    const auto& lay = op.layout();
    Eigen::VectorXd z(lay.dim());
    for (int i = 0; i < lay.n_ev; ++i) {
      ev_qps[i].lin = -w.segment(lay.ev(i), lay.ev_dim());
      x_warm[i] = qp_active_set(ev_qps[i], x_warm[i]);
      z.segment(lay.ev(i), lay.ev_dim()) = x_warm[i];
    }
    z.segment(lay.y(), lay.y_dim) = project_grid(w.segment(lay.y(), lay.y_dim));
    z.segment(lay.nodal(), lay.n_bus) = w.segment(lay.nodal(), lay.n_bus);
    z.segment(lay.road(), lay.n_edge) =
        w.segment(lay.road(), lay.n_edge).cwiseMax(0.0);
    z.segment(lay.station(), lay.n_station) =
        w.segment(lay.station(), lay.n_station).cwiseMax(0.0);
    return z;
  }
};

}  // namespace

ExtragradientResult extragradient_solve(const net::Scenario& scenario,
                                        const ExtragradientOptions& opts) {
  if (static_cast<int>(scenario.evs.size()) > opts.max_evs ||
      static_cast<int>(scenario.grid.buses.size()) > opts.max_buses)
    throw std::invalid_argument(
        "extragradient_solve: instance exceeds the reference-method scale guard");

  OperatorStack op(scenario);
  const auto& lay = op.layout();
  EgProjector proj(op, scenario);

  // The raw game map is badly scaled: imbalance rows live on the kW scale
  // while prices live near $0.05/kWh. Run the method on rescaled price
  // variables lambda' = lambda / s with the paired map rows scaled by s.
  // That is a congruence (a block-diagonal metric change), so monotonicity
  // is preserved, and since max(0, s w) = s max(0, w) the projections are
  // untouched. s is set per family from the coupling norms: energy rows
  // couple through the battery demands, road rows through the fleet size.
  double q_sq = 0.0;
  for (const auto& ev : scenario.evs) q_sq += ev.q * ev.q;
  const double s_energy = 1.0 / std::max(1.0, std::sqrt(q_sq));
  const double s_road = 1.0 / std::max(1.0, std::sqrt(static_cast<double>(lay.n_ev)));
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(lay.dim());
  scale.segment(lay.nodal(), lay.n_bus).setConstant(s_energy);
  scale.segment(lay.road(), lay.n_edge).setConstant(s_road);
  scale.segment(lay.station(), lay.n_station).setConstant(s_energy);

  const auto apply_scaled = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return scale.asDiagonal() * op.apply(scale.asDiagonal() * u);
  };
  // Certification stays in the original variables: one unit step of the
  // unscaled map followed by the projection must return the point itself.
  const auto certified_residual = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd z = scale.asDiagonal() * u;
    const Eigen::VectorXd fixed = proj.project(z - op.apply(z));
    return (fixed - z).lpNorm<Eigen::Infinity>();
  };

  Eigen::VectorXd u = Eigen::VectorXd::Zero(lay.dim());
  for (int i = 0; i < lay.n_ev; ++i)
    u.segment(lay.ev(i), lay.ev_dim()) = proj.x_warm[i];
  u.segment(lay.y(), lay.y_dim) =
      grid_prox_oracle(op.dso(), Eigen::VectorXd::Zero(lay.y_dim), 0.0);

  ExtragradientResult res;
  double gamma = opts.step0;
  for (int it = 0; it < opts.max_iters; ++it) {
    const Eigen::VectorXd Fu = apply_scaled(u);
    Eigen::VectorXd u_half;
    // Backtrack until the step satisfies the local Lipschitz test.
    for (;;) {
      u_half = proj.project(u - gamma * Fu);
      const double move = (u_half - u).norm();
      if (move <= 1e-300) break;
      const double change = (apply_scaled(u_half) - Fu).norm();
      if (gamma * change <= 0.9 * move) break;
      gamma *= 0.5;
      if (gamma < 1e-14)
        throw std::runtime_error("extragradient_solve: step collapsed");
    }

    const Eigen::VectorXd u_next = proj.project(u - gamma * apply_scaled(u_half));
    const double move = (u_next - u).lpNorm<Eigen::Infinity>();
    u = u_next;
    res.iterations = it + 1;

    if (move <= 0.1 * opts.tol * std::min(1.0, gamma) || (it + 1) % 2000 == 0) {
      res.residual = certified_residual(u);
      if (res.residual <= opts.tol) {
        res.converged = true;
        res.z = scale.asDiagonal() * u;
        return res;
      }
    }
    gamma = std::min(gamma * 1.02, opts.step0 * 10.0);
  }
  res.residual = certified_residual(u);
  res.converged = res.residual <= opts.tol;
  res.z = scale.asDiagonal() * u;
  return res;
}

ProbeResult monotonicity_probe(const net::Scenario& scenario, int n_pairs,
                               std::uint64_t seed) {
  OperatorStack op(scenario);
  const auto& lay = op.layout();
  DetRng rng(seed);

  std::vector<std::vector<Eigen::VectorXd>> verts;
  verts.reserve(scenario.evs.size());
  for (const auto& ev : scenario.evs)
    verts.push_back(ev_station_vertices(scenario.transport, scenario.stations, ev));

  const auto& set = op.dso().feasible_set();
  auto sample = [&]() {
    Eigen::VectorXd z(lay.dim());
    for (int i = 0; i < lay.n_ev; ++i) {
      // Random convex combination of the EV's path vertices: always feasible.
      Eigen::VectorXd wts(static_cast<Eigen::Index>(verts[i].size()));
      for (Eigen::Index k = 0; k < wts.size(); ++k) wts[k] = rng.uniform(0.0, 1.0);
      wts /= wts.sum();
      Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.ev_dim());
      for (Eigen::Index k = 0; k < wts.size(); ++k) x += wts[k] * verts[i][k];
      z.segment(lay.ev(i), lay.ev_dim()) = x;
    }
    for (int j = 0; j < lay.y_dim; ++j) {
      double lo = set.lo[j], hi = set.hi[j];
      if (!std::isfinite(lo)) lo = -1e4;
      if (!std::isfinite(hi)) hi = 1e4;
      z[lay.y() + j] = rng.uniform(lo, hi);
    }
    for (int b = 0; b < lay.n_bus; ++b) z[lay.nodal() + b] = rng.uniform(-1.0, 1.0);
    for (int e = 0; e < lay.n_edge; ++e) z[lay.road() + e] = rng.uniform(0.0, 1.0);
    for (int d = 0; d < lay.n_station; ++d)
      z[lay.station() + d] = rng.uniform(0.0, 1.0);
    return z;
  };

  ProbeResult out;
  out.min_inner = std::numeric_limits<double>::infinity();
  out.min_normalized = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_pairs; ++k) {
    const Eigen::VectorXd z1 = sample();
    const Eigen::VectorXd z2 = sample();
    const double nsq = (z1 - z2).squaredNorm();
    if (nsq <= 0.0) continue;
    const double inner = (op.apply(z1) - op.apply(z2)).dot(z1 - z2);
    out.min_inner = std::min(out.min_inner, inner);
    out.min_normalized = std::min(out.min_normalized, inner / nsq);
  }
  return out;
}

double KktReport::overall() const {
  return std::max({ev_stationarity, grid_stationarity, primal_feasibility, dual_sign,
                   comp_gap});
}

KktReport kkt_audit(const net::Scenario& scenario, const Eigen::VectorXd& z) {
  OperatorStack op(scenario);
  const auto& lay = op.layout();
  if (z.size() != lay.dim()) throw std::invalid_argument("kkt_audit: bad state size");

  const Eigen::VectorXd Tz = op.apply(z);
  KktReport rep;

  for (int i = 0; i < lay.n_ev; ++i) {
    const Eigen::VectorXd x = op.ev_x(z, i);
    QpProblem p;
    const LocalPolytope poly =
        build_local_polytope(scenario.transport, scenario.stations, scenario.evs[i]);
    p.A = Eigen::MatrixXd(poly.A);
    p.b = poly.b;
    p.lo = poly.lo;
    p.hi = poly.hi;
    p.h = Eigen::VectorXd::Ones(lay.ev_dim());
    p.lin = -(x - Tz.segment(lay.ev(i), lay.ev_dim()));
    const Eigen::VectorXd proj = qp_active_set(
        p, ev_feasible_point(scenario.transport, scenario.stations, scenario.evs[i]));
    rep.ev_stationarity =
        std::max(rep.ev_stationarity, (x - proj).lpNorm<Eigen::Infinity>());

    // Primal: the EV's own polytope.
    const double eq = (poly.A * x - poly.b).cwiseAbs().maxCoeff();
    const double box = std::max((poly.lo - x).maxCoeff(), (x - poly.hi).maxCoeff());
    rep.primal_feasibility = std::max({rep.primal_feasibility, eq, box});
  }

  {
    const Eigen::VectorXd y = op.y(z);
    const Eigen::VectorXd target = y - Tz.segment(lay.y(), lay.y_dim);
    const Eigen::VectorXd proj = grid_prox_oracle(op.dso(), target, 0.0);
    rep.grid_stationarity = (y - proj).lpNorm<Eigen::Infinity>();

    const auto& set = op.dso().feasible_set();
    const Eigen::VectorXd eq = set.A * y - set.b;
    rep.primal_feasibility =
        std::max(rep.primal_feasibility, eq.cwiseAbs().maxCoeff());
    for (int j = 0; j < lay.y_dim; ++j) {
      if (std::isfinite(set.lo[j]))
        rep.primal_feasibility = std::max(rep.primal_feasibility, set.lo[j] - y[j]);
      if (std::isfinite(set.hi[j]))
        rep.primal_feasibility = std::max(rep.primal_feasibility, y[j] - set.hi[j]);
    }
    for (const auto& disc : set.discs) {
      const double overload = std::hypot(y[disc.a], y[disc.b]) - disc.radius;
      rep.primal_feasibility = std::max(rep.primal_feasibility, overload);
    }
  }

  const AggregateSignal agg = op.aggregates(z);
  const Eigen::VectorXd g = op.dso().active_imbalance(op.y(z), agg.phi);
  rep.primal_feasibility =
      std::max(rep.primal_feasibility, g.cwiseAbs().maxCoeff());
  rep.primal_feasibility = std::max(
      rep.primal_feasibility,
      (agg.sigma - op.road_caps()).maxCoeff());
  rep.primal_feasibility = std::max(
      rep.primal_feasibility,
      (agg.phi - op.station_caps()).maxCoeff());

  for (int e = 0; e < lay.n_edge; ++e) {
    const double lam = z[lay.road() + e];
    rep.dual_sign = std::max(rep.dual_sign, -lam);
    rep.comp_gap =
        std::max(rep.comp_gap, lam * std::max(op.road_caps()[e] - agg.sigma[e], 0.0));
  }
  for (int d = 0; d < lay.n_station; ++d) {
    const double lam = z[lay.station() + d];
    rep.dual_sign = std::max(rep.dual_sign, -lam);
    rep.comp_gap = std::max(
        rep.comp_gap, lam * std::max(op.station_caps()[d] - agg.phi[d], 0.0));
  }

  rep.ev_stationarity = std::max(rep.ev_stationarity, 0.0);
  rep.grid_stationarity = std::max(rep.grid_stationarity, 0.0);
  rep.primal_feasibility = std::max(rep.primal_feasibility, 0.0);
  rep.dual_sign = std::max(rep.dual_sign, 0.0);
  rep.comp_gap = std::max(rep.comp_gap, 0.0);
  return rep;
}

}  // namespace vgwe::oracle
