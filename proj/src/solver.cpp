#include "vgwe/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vgwe/coordinators.hpp"
#include "vgwe/rng.hpp"

namespace vgwe {

SolverConfig resolve_config(const net::SolverSettings& s) {
  SolverConfig c;
  if (s.tau) c.tau = *s.tau;
  if (s.tau0) c.tau0 = *s.tau0;
  if (s.mu) c.mu = *s.mu;
  if (s.mu_nodal) c.mu_nodal = *s.mu_nodal;
  if (s.mu_road) c.mu_road = *s.mu_road;
  if (s.mu_station) c.mu_station = *s.mu_station;
  if (s.theta) c.theta = *s.theta;
  if (s.eps_primal) c.eps_primal = *s.eps_primal;
  if (s.eps_feas) c.eps_feas = *s.eps_feas;
  if (s.eps_dual) c.eps_dual = *s.eps_dual;
  if (s.eps_inner) c.eps_inner = *s.eps_inner;
  if (s.max_iters) c.max_iters = *s.max_iters;
  if (s.max_inner) c.max_inner = *s.max_inner;
  if (s.seed) c.seed = *s.seed;
  if (s.station_price_lag) c.station_price_lag = *s.station_price_lag;
  return c;
}

double estimate_lipschitz(OperatorStack& op, std::uint64_t seed, int n_pairs,
                          int n_power) {
  DetRng rng(seed);
  double best = 0.0;
  Eigen::VectorXd base, dir;
  for (int k = 0; k < n_pairs; ++k) {
    const Eigen::VectorXd za = op.sample_point(rng);
    const Eigen::VectorXd zb = op.sample_point(rng);
    const double dz = (za - zb).norm();
    if (dz <= 0.0) continue;
    const double ratio = (op.apply(za) - op.apply(zb)).norm() / dz;
    if (ratio >= best) {
      best = ratio;
      base = za;
      dir = (zb - za) / dz;
    }
  }
  if (base.size() == 0) return 0.0;

  // Finite-difference power iteration around the strongest sample.
  const Eigen::VectorXd t0 = op.apply(base);
  const double fd = 1e-6 * (1.0 + base.norm());
  Eigen::VectorXd w = dir;
  for (int it = 0; it < n_power; ++it) {
    Eigen::VectorXd jw = (op.apply(base + fd * w) - t0) / fd;
    const double n = jw.norm();
    if (n <= 1e-14) break;
    best = std::max(best, n);
    w = jw / n;
  }
  return best;
}

ViolationReport measure_violation(const OperatorStack& op, const Eigen::VectorXd& z) {
  const auto& lay = op.layout();
  const AggregateSignal agg = op.aggregates(z);
  const Eigen::VectorXd g = op.dso().active_imbalance(op.y(z), agg.phi);

  ViolationReport rep;
  rep.imbalance = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  const Eigen::VectorXd road_over = (agg.sigma - op.road_caps()).cwiseMax(0.0);
  const Eigen::VectorXd station_over = (agg.phi - op.station_caps()).cwiseMax(0.0);
  rep.road_excess = road_over.size() ? road_over.maxCoeff() : 0.0;
  rep.station_excess = station_over.size() ? station_over.maxCoeff() : 0.0;

  double gap = 0.0;
  for (int e = 0; e < lay.n_edge; ++e) {
    const double slack = std::max(op.road_caps()[e] - agg.sigma[e], 0.0);
    gap = std::max(gap, z[lay.road() + e] * slack);
    if (z[lay.road() + e] > 1e-9) rep.binding_roads.push_back(e);
    if (road_over[e] > 0.0) rep.over_roads.push_back(e);
  }
  for (int d = 0; d < lay.n_station; ++d) {
    const double slack = std::max(op.station_caps()[d] - agg.phi[d], 0.0);
    gap = std::max(gap, z[lay.station() + d] * slack);
    if (z[lay.station() + d] > 1e-9) rep.binding_stations.push_back(d);
    if (station_over[d] > 0.0) rep.over_stations.push_back(d);
  }
  rep.comp_gap = gap;
  return rep;
}

double natural_residual(OperatorStack& op, const Eigen::VectorXd& z) {
  const auto& lay = op.layout();
  const Eigen::VectorXd w = z - op.apply(z);

  double res = 0.0;
  for (int i = 0; i < lay.n_ev; ++i) {
    const Eigen::VectorXd xhat =
        op.agents()[i].prox(w.segment(lay.ev(i), lay.ev_dim()), 0.0);
    res = std::max(
        res, (xhat - Eigen::VectorXd(op.ev_x(z, i))).lpNorm<Eigen::Infinity>());
  }

  const Eigen::VectorXd yhat = op.dso().prox(w.segment(lay.y(), lay.y_dim), 0.0);
  res = std::max(res, (yhat - Eigen::VectorXd(op.y(z))).lpNorm<Eigen::Infinity>());

  // Bus prices are unconstrained, so their gap is the map value itself.
  res = std::max(res, w.segment(lay.nodal(), lay.n_bus).size()
                          ? (Eigen::VectorXd(op.nodal(z)) -
                             w.segment(lay.nodal(), lay.n_bus))
                                .lpNorm<Eigen::Infinity>()
                          : 0.0);

  const Eigen::VectorXd road_hat = w.segment(lay.road(), lay.n_edge).cwiseMax(0.0);
  res = std::max(res,
                 (Eigen::VectorXd(op.road(z)) - road_hat).lpNorm<Eigen::Infinity>());
  const Eigen::VectorXd station_hat =
      w.segment(lay.station(), lay.n_station).cwiseMax(0.0);
  res = std::max(
      res, (Eigen::VectorXd(op.station(z)) - station_hat).lpNorm<Eigen::Infinity>());
  return res;
}

ConvergenceCheck check_convergence(const OperatorStack& op, const Eigen::VectorXd& z,
                                   double step_delta, const SolverConfig& config) {
  const ViolationReport rep = measure_violation(op, z);
  ConvergenceCheck out;
  out.step_ok = step_delta <= config.eps_primal;
  out.feasible = std::max({rep.road_excess, rep.station_excess, rep.imbalance}) <=
                 config.eps_feas;
  out.complementary = rep.comp_gap <= config.eps_dual;

  std::string msg;
  auto append = [&msg](const std::string& part) {
    if (!msg.empty()) msg += "; ";
    msg += part;
  };
  if (!out.step_ok)
    append("iterate still moving by " + std::to_string(step_delta));
  if (!out.feasible) {
    const AggregateSignal agg = op.aggregates(z);
    for (int d : rep.over_stations) {
      const double by = agg.phi[d] - op.station_caps()[d];
      if (by > config.eps_feas)
        append("station " + std::to_string(op.stations()[d].id) +
               " over energy cap by " + std::to_string(by) + " kWh");
    }
    for (int e : rep.over_roads) {
      const double by = agg.sigma[e] - op.road_caps()[e];
      if (by > config.eps_feas)
        append("road " + std::to_string(op.transport().edges[e].id) +
               " over flow cap by " + std::to_string(by));
    }
    if (rep.imbalance > config.eps_feas)
      append("bus power imbalance of " + std::to_string(rep.imbalance) + " kW");
  }
  if (!out.complementary)
    append("price-slack gap of " + std::to_string(rep.comp_gap));
  out.detail = msg.empty() ? "converged" : msg;
  return out;
}

EquilibriumResult solve_equilibrium(const net::Scenario& scenario,
                                    const SolverConfig& config) {
  OperatorStack op(scenario);
  const auto& lay = op.layout();
  const int M = lay.n_ev, E = lay.n_edge, D = lay.n_station, B = lay.n_bus;

  SolverConfig cfg = config;
  if (cfg.theta < 0.0 || cfg.theta >= 1.0 / 3.0)
    throw std::invalid_argument("solver: theta must lie in [0, 1/3)");

  SolveStats stats;
  if (cfg.tau <= 0.0) {
    const double L = estimate_lipschitz(op, cfg.seed);
    stats.lipschitz_estimate = L;
    cfg.tau = (L > 1e-12) ? 0.45 / L : 1.0;
  }
  if (cfg.tau0 <= 0.0) cfg.tau0 = cfg.tau;
  if (cfg.mu <= 0.0) cfg.mu = cfg.tau;
  if (cfg.mu_nodal <= 0.0) cfg.mu_nodal = cfg.mu;
  if (cfg.mu_road <= 0.0) cfg.mu_road = cfg.mu;
  if (cfg.mu_station <= 0.0) cfg.mu_station = cfg.mu;

  for (auto& a : op.agents()) a.configure_inner(cfg.eps_inner, cfg.max_inner);
  op.dso().configure_inner(cfg.eps_inner, cfg.max_inner);

  // Start every player from its own preferred point pushed into its set, and
  // the grid from a load-proportional dispatch; prices start flat at zero.
  std::vector<Eigen::VectorXd> x(M), x_prev(M);
  for (int i = 0; i < M; ++i) {
    x[i] = op.agents()[i].prox(op.agents()[i].preference(), 0.0);
    x_prev[i] = x[i];
  }
  Eigen::VectorXd y = op.dso().cold_start();
  Eigen::VectorXd y_prev = y;
  Eigen::VectorXd lam_nodal = Eigen::VectorXd::Zero(B), lam_nodal_prev = lam_nodal;
  Eigen::VectorXd lam_road = Eigen::VectorXd::Zero(E), lam_road_prev = lam_road;
  Eigen::VectorXd lam_station = Eigen::VectorXd::Zero(D), lam_station_prev = lam_station;

  auto gather = [&](const std::vector<Eigen::VectorXd>& xs) {
    return build_aggregates(op.transport(), op.stations(), xs, op.charge_demands());
  };
  AggregateSignal agg = gather(x);
  AggregateSignal agg_prev = agg;
  Eigen::VectorXd latency = bpr_latency(op.transport(), agg.sigma);
  Eigen::VectorXd latency_prev = latency;
  Eigen::VectorXd congestion = station_congestion(op.stations(), agg.delta);
  Eigen::VectorXd congestion_prev = congestion;
  Eigen::VectorXd imbalance = op.dso().active_imbalance(y, agg.phi);

  EquilibriumResult result;
  auto track_inner = [&](const DiagQpResult& st) {
    if (!st.converged) ++stats.inner_failures;
    stats.inner_worst_residual = std::max(stats.inner_worst_residual, st.residual);
  };

  ViolationReport viol;
  int iter = 0;
  for (iter = 1; iter <= cfg.max_iters; ++iter) {
    double dz = 0.0;

    const Eigen::VectorXd energy_price =
        lam_station +
        op.dso().station_prices(cfg.station_price_lag ? lam_nodal_prev : lam_nodal);

    for (int i = 0; i < M; ++i) {
      EvAgent& a = op.agents()[i];
      const Eigen::VectorXd travel = a.travel_gradient(latency, congestion);
      const Eigen::VectorXd travel_old = a.travel_gradient(latency_prev, congestion_prev);
      const Eigen::VectorXd step = x[i] -
                                   cfg.tau * (2.0 * travel - travel_old +
                                              a.price_gradient(lam_road, energy_price)) +
                                   cfg.theta * (x[i] - x_prev[i]);
      Eigen::VectorXd x_new = a.prox(step, cfg.tau);
      track_inner(a.last_prox_stats());
      dz = std::max(dz, (x_new - x[i]).lpNorm<Eigen::Infinity>());
      x_prev[i] = std::move(x[i]);
      x[i] = std::move(x_new);
    }

    agg_prev = std::move(agg);
    agg = gather(x);
    latency_prev = std::move(latency);
    latency = bpr_latency(op.transport(), agg.sigma);
    congestion_prev = std::move(congestion);
    congestion = station_congestion(op.stations(), agg.delta);

    {
      const Eigen::VectorXd step = y - cfg.tau0 * op.dso().coupling_gradient(lam_nodal) +
                                   cfg.theta * (y - y_prev);
      Eigen::VectorXd y_new = op.dso().prox(step, cfg.tau0);
      track_inner(op.dso().last_prox_stats());
      dz = std::max(dz, (y_new - y).lpNorm<Eigen::Infinity>());
      y_prev = std::move(y);
      y = std::move(y_new);
    }

    const Eigen::VectorXd imbalance_prev = std::move(imbalance);
    imbalance = op.dso().active_imbalance(y, agg.phi);

    if (!cfg.freeze_duals) {
      Eigen::VectorXd nodal_new = nodal_price_update(lam_nodal, lam_nodal_prev, imbalance,
                                                     imbalance_prev, cfg.mu_nodal,
                                                     cfg.theta);
      Eigen::VectorXd road_new =
          capacity_price_update(lam_road, lam_road_prev, agg.sigma, agg_prev.sigma,
                                op.road_caps(), cfg.mu_road, cfg.theta);
      Eigen::VectorXd station_new =
          capacity_price_update(lam_station, lam_station_prev, agg.phi, agg_prev.phi,
                                op.station_caps(), cfg.mu_station, cfg.theta);
      dz = std::max(dz, (nodal_new - lam_nodal).lpNorm<Eigen::Infinity>());
      dz = std::max(dz, (road_new - lam_road).lpNorm<Eigen::Infinity>());
      dz = std::max(dz, (station_new - lam_station).lpNorm<Eigen::Infinity>());
      lam_nodal_prev = std::move(lam_nodal);
      lam_nodal = std::move(nodal_new);
      lam_road_prev = std::move(lam_road);
      lam_road = std::move(road_new);
      lam_station_prev = std::move(lam_station);
      lam_station = std::move(station_new);
    }

    viol.imbalance = imbalance.size() ? imbalance.cwiseAbs().maxCoeff() : 0.0;
    viol.road_excess =
        E ? (agg.sigma - op.road_caps()).cwiseMax(0.0).maxCoeff() : 0.0;
    viol.station_excess =
        D ? (agg.phi - op.station_caps()).cwiseMax(0.0).maxCoeff() : 0.0;
    double gap = 0.0;
    for (int e = 0; e < E; ++e)
      gap = std::max(gap, lam_road[e] * std::max(op.road_caps()[e] - agg.sigma[e], 0.0));
    for (int d = 0; d < D; ++d)
      gap = std::max(gap,
                     lam_station[d] * std::max(op.station_caps()[d] - agg.phi[d], 0.0));
    viol.comp_gap = gap;

    if (cfg.trace_every > 0 && (iter % cfg.trace_every == 0 || iter == 1)) {
      TraceRow row;
      row.iter = iter;
      row.step_delta = dz;
      row.imbalance = viol.imbalance;
      row.road_excess = viol.road_excess;
      row.station_excess = viol.station_excess;
      row.comp_gap = viol.comp_gap;
      row.generation_cost = op.dso().generation_cost(y);
      const auto& glay = op.dso().layout();
      row.gen_p.resize(glay.n_gen);
      for (int g = 0; g < glay.n_gen; ++g) row.gen_p[g] = y[glay.p(g)];
      row.station_demand = agg.phi;
      row.road_tolls = lam_road;
      row.station_prices = lam_station;
      row.nodal_prices = lam_nodal;
      result.trace.push_back(std::move(row));
    }

    stats.step_delta = dz;
    const bool feas_ok = std::max({viol.road_excess, viol.station_excess,
                                   viol.imbalance}) <= cfg.eps_feas;
    if (dz <= cfg.eps_primal && feas_ok && viol.comp_gap <= cfg.eps_dual) {
      stats.converged = true;
      break;
    }
  }
  stats.iterations = std::min(iter, cfg.max_iters);

  Eigen::VectorXd z(lay.dim());
  for (int i = 0; i < M; ++i) z.segment(lay.ev(i), lay.ev_dim()) = x[i];
  z.segment(lay.y(), lay.y_dim) = y;
  z.segment(lay.nodal(), B) = lam_nodal;
  z.segment(lay.road(), E) = lam_road;
  z.segment(lay.station(), D) = lam_station;

  stats.natural_residual = natural_residual(op, z);
  result.z = std::move(z);
  result.used = cfg;
  result.stats = stats;
  result.violation = measure_violation(op, result.z);
  return result;
}

}  // namespace vgwe
