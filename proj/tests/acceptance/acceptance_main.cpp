// Acceptance gate: ten end-to-end checks of the equilibrium solver against
// its reference scenario, independent oracles, and published tolerances.
// Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vgwe/coordinators.hpp"
#include "vgwe/network.hpp"
#include "vgwe/oracle.hpp"
#include "vgwe/scenario_io.hpp"
#include "vgwe/solver.hpp"

using namespace vgwe;

namespace {

std::string src_path(const std::string& rel) {
  return std::string(VGWE_SOURCE_DIR) + "/" + rel;
}

struct Outcome {
  std::string id;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> outcomes;

void record(const std::string& id, bool pass, const std::string& detail) {
  outcomes.push_back({id, pass, detail});
  std::cerr << id << (pass ? " ok: " : " FAILING: ") << detail << "\n";
}

template <typename Fn>
void guarded(const std::string& id, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    record(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct TimedSolve {
  EquilibriumResult result;
  double seconds = 0.0;
};

TimedSolve timed_solve(const net::Scenario& sc, const SolverConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  TimedSolve out;
  out.result = solve_equilibrium(sc, cfg);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void lift_coupling_caps(net::Scenario& sc) {
  for (auto& e : sc.transport.edges) e.cap = 1e12;
  for (auto& d : sc.stations) d.cap_energy = 1e12;
}

// ---------------------------------------------------------------------------
// C1 + C2 + C9: the reference scenario, solved with and without inertia.

void fixture_criteria(const net::Scenario& fixture) {
  SolverConfig cfg = resolve_config(fixture.solver);
  cfg.theta = 0.3;
  cfg.trace_every = 1;
  const TimedSolve with_inertia = timed_solve(fixture, cfg);
  const EquilibriumResult& res = with_inertia.result;

  OperatorStack op(fixture);
  const auto& lay = op.layout();
  const AggregateSignal agg = op.aggregates(res.z);
  const Eigen::VectorXd y = op.y(res.z);
  const auto& glay = op.dso().layout();

  // C1: physical feasibility of the converged state, within 600 s.
  {
    bool ok = res.stats.converged;
    std::ostringstream why;
    if (!ok) why << "did not converge in " << res.stats.iterations << " iterations; ";

    double station_over = 0.0;
    for (int d = 0; d < lay.n_station; ++d)
      station_over = std::max(station_over, agg.phi[d] - op.station_caps()[d]);
    if (station_over > 1e-3) {
      ok = false;
      why << "station demand exceeds cap by " << fmt(station_over) << " kWh; ";
    }

    double road_over = 0.0;
    for (int e = 0; e < lay.n_edge; ++e)
      road_over = std::max(road_over, agg.sigma[e] - op.road_caps()[e]);
    if (road_over > 1e-3) {
      ok = false;
      why << "road flow exceeds cap by " << fmt(road_over) << "; ";
    }

    const double imbalance =
        op.dso().active_imbalance(y, agg.phi).cwiseAbs().maxCoeff();
    if (imbalance > 1e-3) {
      ok = false;
      why << "bus imbalance " << fmt(imbalance) << " kW; ";
    }

    double disc_over = 0.0;
    for (int l = 0; l < glay.n_line; ++l) {
      const double pp = y[glay.P(l)], qq = y[glay.Q(l)];
      const double s = fixture.grid.lines[l].s_max;
      disc_over = std::max(disc_over, pp * pp + qq * qq - s * s);
    }
    if (disc_over > 1e-3) {
      ok = false;
      why << "line loading squared over cap by " << fmt(disc_over) << "; ";
    }

    double v_lo = 1e300, v_hi = -1e300;
    for (int b = 0; b < glay.n_bus; ++b) {
      v_lo = std::min(v_lo, y[glay.v(b)]);
      v_hi = std::max(v_hi, y[glay.v(b)]);
    }
    if (v_lo < 129.83 - 1e-9 || v_hi > 193.93 + 1e-9) {
      ok = false;
      why << "voltage range [" << fmt(v_lo) << ", " << fmt(v_hi) << "] off band; ";
    }

    if (with_inertia.seconds >= 600.0) {
      ok = false;
      why << "runtime " << fmt(with_inertia.seconds) << " s over budget; ";
    }

    std::ostringstream det;
    det << "station over " << fmt(station_over) << " kWh, road over " << fmt(road_over)
        << ", imbalance " << fmt(imbalance) << " kW, line disc over " << fmt(disc_over)
        << ", v in [" << fmt(v_lo) << ", " << fmt(v_hi) << "], "
        << res.stats.iterations << " iterations in " << fmt(with_inertia.seconds) << " s";
    record("C1", ok, ok ? det.str() : why.str() + det.str());
  }

  // C2: nonnegative congestion prices at every sweep, small complementarity
  // gap, and no surcharge on stations with visible slack.
  {
    bool ok = res.stats.converged;
    std::ostringstream why;

    double worst_price = 0.0;
    for (const TraceRow& row : res.trace) {
      if (row.road_tolls.size()) worst_price = std::min(worst_price, row.road_tolls.minCoeff());
      if (row.station_prices.size())
        worst_price = std::min(worst_price, row.station_prices.minCoeff());
    }
    if (worst_price < 0.0) {
      ok = false;
      why << "negative congestion price " << fmt(worst_price) << " in trace; ";
    }

    if (res.violation.comp_gap > 1e-3) {
      ok = false;
      why << "complementarity gap " << fmt(res.violation.comp_gap) << "; ";
    }

    double stray = 0.0;
    for (int d = 0; d < lay.n_station; ++d) {
      const double slack = op.station_caps()[d] - agg.phi[d];
      if (slack > 1e-2) stray = std::max(stray, res.z[lay.station() + d]);
    }
    if (stray > 1e-6) {
      ok = false;
      why << "surcharge " << fmt(stray) << " on a slack station; ";
    }

    std::ostringstream det;
    det << "trace price floor " << fmt(worst_price) << ", comp gap "
        << fmt(res.violation.comp_gap) << ", max surcharge on slack stations "
        << fmt(stray);
    record("C2", ok, ok ? det.str() : why.str() + det.str());
  }

  // C9: the run above used theta = 0.3; repeat without inertia.
  {
    SolverConfig plain = resolve_config(fixture.solver);
    plain.theta = 0.0;
    plain.trace_every = 0;
    const TimedSolve no_inertia = timed_solve(fixture, plain);
    const bool ok = res.stats.converged && no_inertia.result.stats.converged;
    std::ostringstream det;
    det << "theta=0: " << no_inertia.result.stats.iterations << " iterations in "
        << fmt(no_inertia.seconds) << " s; theta=0.3: " << res.stats.iterations
        << " iterations in " << fmt(with_inertia.seconds) << " s";
    record("C9", ok, det.str());
  }
}

// ---------------------------------------------------------------------------
// C3: heavier charging demand must drive at least one feeder generator to its
// active-power ceiling (the substation import interface does not count).

void generation_pin_criterion(const net::Scenario& fixture) {
  net::Scenario heavy = fixture;
  for (auto& ev : heavy.evs) ev.q *= 1.25;
  SolverConfig cfg = resolve_config(heavy.solver);
  cfg.theta = 0.3;
  const TimedSolve ts = timed_solve(heavy, cfg);
  const EquilibriumResult& res = ts.result;

  OperatorStack op(heavy);
  const auto& glay = op.dso().layout();
  const Eigen::VectorXd y = op.y(res.z);

  bool pinned = false;
  std::ostringstream list;
  for (int g = 0; g < glay.n_gen; ++g) {
    const auto& gen = heavy.grid.generators[g];
    if (gen.bus == heavy.grid.substation) continue;
    const double gap = gen.p_max - y[glay.p(g)];
    list << "gen " << gen.id << " gap " << fmt(gap) << " kW; ";
    if (gap <= 1e-3) pinned = true;
  }
  const bool ok = res.stats.converged && pinned;
  std::ostringstream det;
  det << (res.stats.converged ? "" : "did not converge; ") << list.str()
      << res.stats.iterations << " iterations in " << fmt(ts.seconds) << " s";
  record("C3", ok, det.str());
}

// ---------------------------------------------------------------------------
// C4: with line, generator, and voltage limits far from binding, locational
// price differences must collapse.

void uniform_price_criterion(const net::Scenario& fixture) {
  net::Scenario loose = fixture;
  for (auto& ln : loose.grid.lines) ln.s_max = 1e9;
  for (auto& g : loose.grid.generators) g.p_max = 1e6;
  for (auto& b : loose.grid.buses) {
    if (b.is_substation) continue;
    b.v_min = 1.0;
    b.v_max = 1e6;
  }
  SolverConfig cfg = resolve_config(loose.solver);
  cfg.theta = 0.3;
  const TimedSolve ts = timed_solve(loose, cfg);
  const EquilibriumResult& res = ts.result;

  OperatorStack op(loose);
  const auto& lay = op.layout();
  double lo = 1e300, hi = -1e300;
  for (int d = 0; d < lay.n_station; ++d) {
    const double price = res.z[lay.nodal() + loose.stations[d].bus];
    lo = std::min(lo, price);
    hi = std::max(hi, price);
  }
  const double spread = hi - lo;
  const bool ok = res.stats.converged && spread <= 1e-3;
  std::ostringstream det;
  det << (res.stats.converged ? "" : "did not converge; ") << "station DLMP spread "
      << fmt(spread) << " $/kWh (" << fmt(lo) << " to " << fmt(hi) << "), "
      << res.stats.iterations << " iterations in " << fmt(ts.seconds) << " s";
  record("C4", ok, det.str());
}

// ---------------------------------------------------------------------------
// C5: on oracle-sized games the production sweep and the reference
// extragradient solver must land on the same point, and both must satisfy
// first-order conditions under the independent auditor.

void toy_agreement_criterion() {
  const std::vector<std::string> toys = {"scenarios/toy_line.toml",
                                         "scenarios/toy_diamond.toml",
                                         "scenarios/toy_pin.toml"};
  bool ok = true;
  std::ostringstream det;
  for (const std::string& rel : toys) {
    const net::Scenario sc = net::load_scenario(src_path(rel));
    const SolverConfig cfg = resolve_config(sc.solver);
    const EquilibriumResult mine = solve_equilibrium(sc, cfg);

    oracle::ExtragradientOptions opts;
    opts.tol = 1e-9;
    const oracle::ExtragradientResult ref = oracle::extragradient_solve(sc, opts);

    const double gap = (mine.z - ref.z).lpNorm<Eigen::Infinity>();
    const double audit_mine = oracle::kkt_audit(sc, mine.z).overall();
    const double audit_ref = oracle::kkt_audit(sc, ref.z).overall();

    const bool this_ok = mine.stats.converged && ref.converged && gap <= 1e-3 &&
                         audit_mine <= 1e-5 && audit_ref <= 1e-5;
    ok = ok && this_ok;
    det << sc.name << ": gap " << fmt(gap) << ", audits " << fmt(audit_mine) << "/"
        << fmt(audit_ref) << "; ";
  }
  record("C5", ok, det.str());
}

// ---------------------------------------------------------------------------
// C6: analytic gradients against central finite differences at random
// feasible points.

void gradient_criterion(const net::Scenario& fixture) {
  OperatorStack op(fixture);
  const auto& lay = op.layout();
  DetRng rng(101);

  const double hstep = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd z = op.sample_point(rng);
    const AggregateSignal agg = op.aggregates(z);
    const Eigen::VectorXd latency = bpr_latency(op.transport(), agg.sigma);
    const Eigen::VectorXd congestion = station_congestion(op.stations(), agg.delta);
    const Eigen::VectorXd tolls = op.road(z);
    const Eigen::VectorXd energy =
        Eigen::VectorXd(op.station(z)) + op.dso().station_prices(op.nodal(z));

    EvAgent& agent = op.agents()[trial % lay.n_ev];
    const Eigen::VectorXd x = op.ev_x(z, trial % lay.n_ev);
    const Eigen::VectorXd grad = agent.own_gradient(x, latency, congestion, tolls, energy);
    double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    for (int k = 0; k < agent.dim(); ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += hstep;
      xm[k] -= hstep;
      const double fd = (agent.cost(xp, latency, congestion, tolls, energy) -
                         agent.cost(xm, latency, congestion, tolls, energy)) /
                        (2.0 * hstep);
      worst = std::max(worst, std::abs(grad[k] - fd) / scale);
    }

    const Eigen::VectorXd y = op.y(z);
    const Eigen::VectorXd gy = op.dso().generation_cost_gradient(y);
    scale = std::max(1.0, gy.lpNorm<Eigen::Infinity>());
    for (int k = 0; k < lay.y_dim; ++k) {
      Eigen::VectorXd yp = y, ym = y;
      yp[k] += hstep;
      ym[k] -= hstep;
      const double fd =
          (op.dso().generation_cost(yp) - op.dso().generation_cost(ym)) / (2.0 * hstep);
      worst = std::max(worst, std::abs(gy[k] - fd) / scale);
    }
  }
  record("C6", worst <= 1e-6,
         "worst relative gradient gap " + fmt(worst) + " over 100 points");
}

// ---------------------------------------------------------------------------
// C7: the game map must be monotone over sampled feasible pairs.

void monotonicity_criterion(const net::Scenario& fixture) {
  const oracle::ProbeResult probe = oracle::monotonicity_probe(fixture, 1000, 2026);
  record("C7", probe.min_inner >= -1e-9,
         "min inner product " + fmt(probe.min_inner) + ", normalized " +
             fmt(probe.min_normalized) + " over 1000 pairs");
}

// ---------------------------------------------------------------------------
// C8: production prox steps against the dense reference solvers.

void prox_criterion(const net::Scenario& fixture) {
  OperatorStack op(fixture);
  const auto& lay = op.layout();
  DetRng rng(303);
  const SolverConfig cfg = resolve_config(fixture.solver);

  double worst_ev = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int i = static_cast<int>(rng.uniform_int(lay.n_ev));
    EvAgent& agent = op.agents()[i];
    agent.configure_inner(1e-11, 500000);
    Eigen::VectorXd v(agent.dim());
    for (int k = 0; k < agent.dim(); ++k) v[k] = rng.uniform(-1.0, 2.0);
    const double tau = (trial % 2 == 0) ? 0.0 : cfg.tau;
    const Eigen::VectorXd mine = agent.prox(v, tau);
    const Eigen::VectorXd ref =
        oracle::ev_prox_oracle(fixture.transport, fixture.stations, fixture.evs[i], v, tau);
    worst_ev = std::max(worst_ev, (mine - ref).lpNorm<Eigen::Infinity>());
  }

  op.dso().configure_inner(1e-11, 500000);
  const Eigen::VectorXd base = op.dso().cold_start();
  double worst_grid = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd v = base;
    for (int k = 0; k < v.size(); ++k) v[k] += rng.uniform(-30.0, 30.0);
    const double tau = (trial % 2 == 0) ? 0.0 : cfg.tau0;
    const Eigen::VectorXd mine = op.dso().prox(v, tau);
    const Eigen::VectorXd ref = oracle::grid_prox_oracle(op.dso(), v, tau);
    worst_grid = std::max(worst_grid, (mine - ref).lpNorm<Eigen::Infinity>());
  }

  record("C8", worst_ev <= 1e-6 && worst_grid <= 1e-6,
         "worst vehicle prox gap " + fmt(worst_ev) + ", worst grid projection gap " +
             fmt(worst_grid) + ", 50 instances each");
}

// ---------------------------------------------------------------------------
// C10: without coupling caps, the bus price at the busiest station must not
// fall as the fleet grows.

void price_monotonicity_criterion(const net::Scenario& fixture) {
  const std::vector<int> grid = {25, 75, 125};
  std::vector<Eigen::VectorXd> nodal;
  std::vector<Eigen::VectorXd> demand;
  bool all_converged = true;
  std::ostringstream runs;

  for (int count : grid) {
    net::Scenario point = fixture;
    lift_coupling_caps(point);
    point.evs.resize(static_cast<std::size_t>(count));
    SolverConfig cfg = resolve_config(point.solver);
    cfg.theta = 0.3;
    const TimedSolve ts = timed_solve(point, cfg);
    all_converged = all_converged && ts.result.stats.converged;

    OperatorStack op(point);
    const auto& lay = op.layout();
    const AggregateSignal agg = op.aggregates(ts.result.z);
    Eigen::VectorXd prices(lay.n_station);
    for (int d = 0; d < lay.n_station; ++d)
      prices[d] = ts.result.z[lay.nodal() + point.stations[d].bus];
    nodal.push_back(prices);
    demand.push_back(agg.phi);
    runs << count << " evs: " << ts.result.stats.iterations << " iterations in "
         << fmt(ts.seconds) << " s; ";
  }

  int busiest = 0;
  demand.back().maxCoeff(&busiest);

  bool monotone = true;
  std::ostringstream seq;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    seq << fmt(nodal[k][busiest]) << (k + 1 < grid.size() ? " <= " : "");
    if (k > 0 && nodal[k][busiest] < nodal[k - 1][busiest] - 1e-6) monotone = false;
  }
  const bool ok = all_converged && monotone;
  record("C10", ok,
         "station " + std::to_string(fixture.stations[busiest].id) +
             " DLMP sequence " + seq.str() + " $/kWh; " + runs.str());
}

}  // namespace

int main() {
  const net::Scenario fixture = net::load_scenario(src_path("scenarios/ieee33_gridcity.toml"));

  guarded("C6", [&] { gradient_criterion(fixture); });
  guarded("C7", [&] { monotonicity_criterion(fixture); });
  guarded("C8", [&] { prox_criterion(fixture); });
  guarded("C5", [] { toy_agreement_criterion(); });
  guarded("C1/C2/C9", [&] { fixture_criteria(fixture); });
  guarded("C3", [&] { generation_pin_criterion(fixture); });
  guarded("C4", [&] { uniform_price_criterion(fixture); });
  guarded("C10", [&] { price_monotonicity_criterion(fixture); });

  std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) {
    auto key = [](const std::string& s) {
      return std::stoi(s.substr(1));
    };
    return key(a.id) < key(b.id);
  });

  bool all = true;
  for (const Outcome& o : outcomes) {
    std::cout << o.id << " " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail << "\n";
    all = all && o.pass;
  }
  if (outcomes.size() != 10) {
    std::cout << "expected 10 criteria, saw " << outcomes.size() << "\n";
    all = false;
  }
  return all ? 0 : 1;
}
