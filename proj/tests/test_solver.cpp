#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "test_util.hpp"
#include "vgwe/oracle.hpp"
#include "vgwe/scenario_io.hpp"
#include "vgwe/solver.hpp"

using namespace vgwe;

namespace {

// One EV whose deviation penalty dwarfs every travel term; with prices frozen
// and generators pinned the whole game reduces to projecting the preference.
net::Scenario preference_dominated() {
  net::Scenario sc;
  sc.name = "pref";
  sc.transport = testutil::chain3();
  sc.grid = testutil::feeder3();
  sc.grid.generators[0].p_min = sc.grid.generators[0].p_max = 15.0;
  sc.grid.generators[1].p_min = sc.grid.generators[1].p_max = 15.0;
  sc.stations = testutil::two_stations();
  sc.evs = {testutil::make_ev(1, 0, 25.0, 5.0, sc.transport, sc.stations)};
  sc.evs[0].alpha = sc.evs[0].beta = 1e8;
  net::validate_scenario(sc);
  return sc;
}

// Constant game map: no vehicles, no generators, no lines. The Lipschitz
// probe sees a zero operator.
net::Scenario constant_map_scenario() {
  net::Scenario sc;
  sc.name = "const";
  sc.transport.n_nodes = 2;
  sc.transport.node_ids = {1, 2};
  sc.transport.bpr = {0.0, 0.0};
  sc.transport.edges = {{1, 0, 1, 0.1, 10.0, 0.0, 5.0}};
  sc.grid.buses = {{1, 0.0, 0.0, 1.0, 1.0, true}};
  sc.grid.substation = 0;
  sc.stations = {{1, 1, 0, 10.0, 0.0, 1.0, 1}};
  net::validate_scenario(sc);
  return sc;
}

double worst_violation(const ViolationReport& v) {
  return std::max({v.road_excess, v.station_excess, v.imbalance});
}

}  // namespace

TEST_CASE("a dominant preference penalty projects in a few sweeps") {
  net::Scenario sc = preference_dominated();
  SolverConfig cfg;
  cfg.tau = 0.05;
  cfg.tau0 = 100.0;
  cfg.theta = 0.0;
  cfg.freeze_duals = true;
  cfg.eps_primal = 1e-6;
  cfg.eps_feas = 1e12;
  cfg.eps_dual = 1e12;
  cfg.max_iters = 50;

  EquilibriumResult res = solve_equilibrium(sc, cfg);
  CHECK(res.stats.converged);
  CHECK(res.stats.iterations <= 3);

  OperatorStack op(sc);
  Eigen::VectorXd ideal = op.agents()[0].prox(op.agents()[0].preference(), 0.0);
  CHECK((Eigen::VectorXd(op.ev_x(res.z, 0)) - ideal).lpNorm<Eigen::Infinity>() <= 1e-5);
}

TEST_CASE("inertia outside its stability range is rejected") {
  net::Scenario sc = preference_dominated();
  SolverConfig cfg;
  cfg.tau = 0.05;
  cfg.theta = 1.0 / 3.0;
  CHECK_THROWS_AS(solve_equilibrium(sc, cfg), std::invalid_argument);
  cfg.theta = -0.01;
  CHECK_THROWS_AS(solve_equilibrium(sc, cfg), std::invalid_argument);
}

TEST_CASE("runs are bitwise reproducible") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_line.toml"));
  SolverConfig cfg = resolve_config(sc.solver);
  cfg.trace_every = 500;

  EquilibriumResult a = solve_equilibrium(sc, cfg);
  EquilibriumResult b = solve_equilibrium(sc, cfg);
  REQUIRE(a.stats.converged);
  CHECK(a.stats.iterations == b.stats.iterations);
  CHECK((a.z - b.z).lpNorm<Eigen::Infinity>() == 0.0);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k)
    CHECK(a.trace[k].step_delta == b.trace[k].step_delta);
}

TEST_CASE("the sweep converges with and without inertia") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_line.toml"));
  for (double theta : {0.0, 0.3}) {
    CAPTURE(theta);
    SolverConfig cfg = resolve_config(sc.solver);
    cfg.theta = theta;
    EquilibriumResult res = solve_equilibrium(sc, cfg);
    CHECK(res.stats.converged);
    CHECK(worst_violation(res.violation) <= 1e-6);
    CHECK(res.violation.comp_gap <= 1e-6);
    CHECK(res.stats.natural_residual <= 1e-4);
  }
}

TEST_CASE("relabeling vehicles permutes the answer and nothing else") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_diamond.toml"));
  SolverConfig cfg = resolve_config(sc.solver);
  EquilibriumResult base = solve_equilibrium(sc, cfg);
  REQUIRE(base.stats.converged);

  net::Scenario swapped = sc;
  std::swap(swapped.evs[0], swapped.evs[1]);
  EquilibriumResult perm = solve_equilibrium(swapped, cfg);
  REQUIRE(perm.stats.converged);

  OperatorStack op(sc);
  const auto& lay = op.layout();
  auto block = [&](const Eigen::VectorXd& z, int i) {
    return Eigen::VectorXd(z.segment(lay.ev(i), lay.ev_dim()));
  };
  CHECK((block(perm.z, 0) - block(base.z, 1)).lpNorm<Eigen::Infinity>() <= 5e-6);
  CHECK((block(perm.z, 1) - block(base.z, 0)).lpNorm<Eigen::Infinity>() <= 5e-6);
  CHECK((block(perm.z, 2) - block(base.z, 2)).lpNorm<Eigen::Infinity>() <= 5e-6);
  Eigen::VectorXd shared_base = base.z.tail(base.z.size() - lay.y());
  Eigen::VectorXd shared_perm = perm.z.tail(perm.z.size() - lay.y());
  CHECK((shared_base - shared_perm).lpNorm<Eigen::Infinity>() <= 5e-6);
}

TEST_CASE("the step probe brackets the norm of an affine map") {
  // In this scenario both vehicles have a single feasible decision, and the
  // latency law is linear, so the game map is affine: its Jacobian is
  // constant and the probe should land within 10% of the top singular value.
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_pin.toml"));
  OperatorStack op(sc);
  const auto& lay = op.layout();

  DetRng rng(3);
  Eigen::VectorXd z0 = op.sample_point(rng);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd zk = op.sample_point(rng);
    for (int i = 0; i < lay.n_ev; ++i)
      REQUIRE((Eigen::VectorXd(op.ev_x(zk, i)) - Eigen::VectorXd(op.ev_x(z0, i)))
                  .lpNorm<Eigen::Infinity>() == 0.0);
  }

  const int n = lay.dim();
  Eigen::MatrixXd J(n, n);
  const double h = 1e-3;
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd zp = z0, zm = z0;
    zp[c] += h;
    zm[c] -= h;
    J.col(c) = (op.apply(zp) - op.apply(zm)) / (2.0 * h);
  }
  const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(J).singularValues()[0];

  const double est = estimate_lipschitz(op, 7, 40, 400);
  CHECK(est <= sigma * (1.0 + 1e-6) + 1e-9);
  CHECK(est >= 0.9 * sigma);
}

TEST_CASE("a constant map falls back to a unit step") {
  net::Scenario sc = constant_map_scenario();
  OperatorStack op(sc);
  CHECK(estimate_lipschitz(op, 3) == 0.0);

  SolverConfig cfg;
  cfg.theta = 0.0;
  cfg.max_iters = 10;
  EquilibriumResult res = solve_equilibrium(sc, cfg);
  CHECK(res.used.tau == 1.0);
  CHECK(res.stats.converged);
  CHECK(res.stats.iterations == 1);
  CHECK(res.stats.natural_residual <= 1e-12);
}

TEST_CASE("sharper congestion never lowers the step probe") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_line.toml"));
  OperatorStack mild(sc);
  net::Scenario steep = sc;
  steep.transport.bpr.pi *= 2.0;
  OperatorStack sharp(steep);
  CHECK(estimate_lipschitz(sharp, 11) >= estimate_lipschitz(mild, 11) - 1e-9);
}

TEST_CASE("the stopping rule names what is wrong") {
  net::Scenario sc = testutil::toy_scenario();
  OperatorStack op(sc);
  const auto& lay = op.layout();

  // Both vehicles charge fully at station 1: 50 kWh against a 30 kWh cap.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.dim());
  for (int i = 0; i < lay.n_ev; ++i) {
    Eigen::VectorXd vertex =
        oracle::ev_station_vertices(sc.transport, sc.stations, sc.evs[i])[0];
    z.segment(lay.ev(i), lay.ev_dim()) = vertex;
  }
  z.segment(lay.y(), lay.y_dim) = op.dso().cold_start();

  SolverConfig cfg;
  cfg.eps_primal = 1.0;
  cfg.eps_feas = 10.0;  // the 20 kWh excess is twice this
  cfg.eps_dual = 1e12;
  ConvergenceCheck check = check_convergence(op, z, 0.0, cfg);
  CHECK(check.step_ok);
  CHECK(!check.feasible);
  CHECK(!check.converged());
  CHECK(check.detail.find("station 1") != std::string::npos);
  CHECK(check.detail.find("over energy cap") != std::string::npos);

  cfg.eps_primal = 1e-6;
  ConvergenceCheck moving = check_convergence(op, z, 0.5, cfg);
  CHECK(!moving.step_ok);
  CHECK(moving.detail.find("still moving") != std::string::npos);
}

TEST_CASE("the natural residual certifies the oracle equilibrium") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_line.toml"));
  oracle::ExtragradientResult ref = oracle::extragradient_solve(sc);
  REQUIRE(ref.converged);

  OperatorStack op(sc);
  CHECK(natural_residual(op, ref.z) <= 1e-6);

  // A nudged bus price is no longer a fixed point, and the gap scales with
  // the nudge.
  const auto& lay = op.layout();
  Eigen::VectorXd near = ref.z;
  near[lay.nodal() + 1] += 1e-2;
  double gap = natural_residual(op, near);
  CHECK(gap >= 1e-4);
  CHECK(gap <= 1.0);

  Eigen::VectorXd nearer = ref.z;
  nearer[lay.nodal() + 1] += 1e-4;
  CHECK(natural_residual(op, nearer) <= gap);
}

TEST_CASE("infeasibility shrinks as the run progresses") {
  net::Scenario sc = net::load_scenario(testutil::src_path("scenarios/toy_line.toml"));
  SolverConfig cfg = resolve_config(sc.solver);
  cfg.max_iters = 200;
  EquilibriumResult early = solve_equilibrium(sc, cfg);
  cfg.max_iters = 400;
  EquilibriumResult late = solve_equilibrium(sc, cfg);
  CHECK(worst_violation(late.violation) <= worst_violation(early.violation) + 1e-12);
}

TEST_CASE("the trace covers every sweep when asked") {
  net::Scenario sc = preference_dominated();
  SolverConfig cfg;
  cfg.tau = 0.05;
  cfg.tau0 = 100.0;
  cfg.theta = 0.0;
  cfg.freeze_duals = true;
  cfg.eps_primal = 1e-6;
  cfg.eps_feas = 1e12;
  cfg.eps_dual = 1e12;
  cfg.max_iters = 50;
  cfg.trace_every = 1;

  EquilibriumResult res = solve_equilibrium(sc, cfg);
  REQUIRE(res.stats.converged);
  REQUIRE(res.trace.size() == static_cast<std::size_t>(res.stats.iterations));
  for (std::size_t k = 0; k < res.trace.size(); ++k)
    CHECK(res.trace[k].iter == static_cast<int>(k) + 1);
  CHECK(res.trace[0].gen_p.size() == 2);
  CHECK(res.trace[0].station_demand.size() == 2);
  CHECK(res.trace[0].nodal_prices.size() == 3);
}
