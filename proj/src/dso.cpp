#include "vgwe/dso.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace vgwe {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Dso::Dso(const net::DistributionNetwork& grid, const std::vector<net::StationSpec>& stations)
    : grid_(grid) {
  lay_.n_gen = static_cast<int>(grid_.generators.size());
  lay_.n_line = static_cast<int>(grid_.lines.size());
  lay_.n_bus = static_cast<int>(grid_.buses.size());

  station_bus_.reserve(stations.size());
  for (const auto& st : stations) station_bus_.push_back(st.bus);

  lines_out_.assign(lay_.n_bus, {});
  lines_in_.assign(lay_.n_bus, {});
  gens_at_.assign(lay_.n_bus, {});
  for (int l = 0; l < lay_.n_line; ++l) {
    lines_out_[grid_.lines[l].from_bus].push_back(l);
    lines_in_[grid_.lines[l].to_bus].push_back(l);
  }
  for (int g = 0; g < lay_.n_gen; ++g) gens_at_[grid_.generators[g].bus].push_back(g);

  // Lines arrive oriented parent -> child; a sweep from the substation vis-
  // its parents before children.
  bfs_order_.clear();
  bfs_order_.reserve(lay_.n_bus);
  std::deque<int> queue{grid_.substation};
  while (!queue.empty()) {
    const int b = queue.front();
    queue.pop_front();
    bfs_order_.push_back(b);
    for (int l : lines_out_[b]) queue.push_back(grid_.lines[l].to_bus);
  }
  if (static_cast<int>(bfs_order_.size()) != lay_.n_bus)
    throw std::invalid_argument("Dso: feeder is not a rooted tree");

  build_set();
  engine_.setup(set_.A, Eigen::VectorXd::Ones(dim()), set_.lo, set_.hi, set_.discs);
  engine_tau_ = 0.0;
}

void Dso::build_set() {
  const int B = lay_.n_bus, L = lay_.n_line, G = lay_.n_gen;
  std::vector<Eigen::Triplet<double>> trips;

  // Rows 0..B-1: reactive balance per bus,
  //   sum(Q out) - sum(Q in) - sum(q gen) = -reactive load.
  for (int b = 0; b < B; ++b) {
    for (int l : lines_out_[b]) trips.emplace_back(b, lay_.Q(l), 1.0);
    for (int l : lines_in_[b]) trips.emplace_back(b, lay_.Q(l), -1.0);
    for (int g : gens_at_[b]) trips.emplace_back(b, lay_.q(g), -1.0);
  }
  // Rows B..B+L-1: voltage drop per line, v_to - v_from + 2rP + 2xQ = 0.
  for (int l = 0; l < L; ++l) {
    const auto& ln = grid_.lines[l];
    trips.emplace_back(B + l, lay_.v(ln.to_bus), 1.0);
    trips.emplace_back(B + l, lay_.v(ln.from_bus), -1.0);
    trips.emplace_back(B + l, lay_.P(l), 2.0 * ln.r);
    trips.emplace_back(B + l, lay_.Q(l), 2.0 * ln.x);
  }
  set_.A.resize(B + L, dim());
  set_.A.setFromTriplets(trips.begin(), trips.end());

  set_.b = Eigen::VectorXd::Zero(B + L);
  for (int b = 0; b < B; ++b) set_.b[b] = -grid_.buses[b].q_load;

  set_.lo = Eigen::VectorXd::Constant(dim(), -kInf);
  set_.hi = Eigen::VectorXd::Constant(dim(), kInf);
  for (int g = 0; g < G; ++g) {
    set_.lo[lay_.p(g)] = grid_.generators[g].p_min;
    set_.hi[lay_.p(g)] = grid_.generators[g].p_max;
    set_.lo[lay_.q(g)] = grid_.generators[g].q_min;
    set_.hi[lay_.q(g)] = grid_.generators[g].q_max;
  }
  for (int b = 0; b < B; ++b) {
    set_.lo[lay_.v(b)] = grid_.buses[b].v_min;
    set_.hi[lay_.v(b)] = grid_.buses[b].v_max;
  }

  set_.discs.clear();
  for (int l = 0; l < L; ++l)
    set_.discs.push_back({lay_.P(l), lay_.Q(l), grid_.lines[l].s_max});
}

void Dso::configure_inner(double eps, int max_iter) {
  inner_eps_ = eps;
  inner_max_ = max_iter;
}

Eigen::VectorXd Dso::active_imbalance(const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& phi) const {
  Eigen::VectorXd g(lay_.n_bus);
  for (int b = 0; b < lay_.n_bus; ++b) {
    double acc = grid_.buses[b].p_load;
    for (int l : lines_out_[b]) acc += y[lay_.P(l)];
    for (int l : lines_in_[b]) acc -= y[lay_.P(l)];
    for (int gi : gens_at_[b]) acc -= y[lay_.p(gi)];
    g[b] = acc;
  }
  for (size_t d = 0; d < station_bus_.size(); ++d) g[station_bus_[d]] += phi[d];
  return g;
}

Eigen::VectorXd Dso::coupling_gradient(const Eigen::VectorXd& lambda) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int gi = 0; gi < lay_.n_gen; ++gi)
    g[lay_.p(gi)] = -lambda[grid_.generators[gi].bus];
  for (int l = 0; l < lay_.n_line; ++l)
    g[lay_.P(l)] = lambda[grid_.lines[l].from_bus] - lambda[grid_.lines[l].to_bus];
  return g;
}

double Dso::generation_cost(const Eigen::VectorXd& y) const {
  double c = 0.0;
  for (int g = 0; g < lay_.n_gen; ++g) {
    const auto& gen = grid_.generators[g];
    const double p = y[lay_.p(g)];
    c += gen.a * p * p + gen.b * p + gen.c;
  }
  return c;
}

Eigen::VectorXd Dso::generation_cost_gradient(const Eigen::VectorXd& y) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int gi = 0; gi < lay_.n_gen; ++gi) {
    const auto& gen = grid_.generators[gi];
    g[lay_.p(gi)] = 2.0 * gen.a * y[lay_.p(gi)] + gen.b;
  }
  return g;
}

Eigen::VectorXd Dso::station_prices(const Eigen::VectorXd& lambda) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(station_bus_.size()));
  for (size_t d = 0; d < station_bus_.size(); ++d) out[d] = lambda[station_bus_[d]];
  return out;
}

Eigen::VectorXd Dso::prox(const Eigen::VectorXd& v, double tau) {
  if (tau != engine_tau_) {
    Eigen::VectorXd h = Eigen::VectorXd::Ones(dim());
    for (int g = 0; g < lay_.n_gen; ++g)
      h[lay_.p(g)] = 1.0 + 2.0 * tau * grid_.generators[g].a;
    engine_.set_h(h);
    engine_tau_ = tau;
  }
  Eigen::VectorXd lin = -v;
  for (int g = 0; g < lay_.n_gen; ++g) lin[lay_.p(g)] += tau * grid_.generators[g].b;
  last_prox_ = engine_.solve(lin, set_.b, inner_eps_, inner_max_);
  return engine_.z();
}

Eigen::VectorXd Dso::cold_start() {
  const int B = lay_.n_bus, G = lay_.n_gen;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim());

  double p_total = 0.0, q_total = 0.0;
  for (const auto& bus : grid_.buses) {
    p_total += bus.p_load;
    q_total += bus.q_load;
  }
  double p_cap = 0.0, q_cap = 0.0;
  for (const auto& gen : grid_.generators) {
    p_cap += std::max(gen.p_max, 0.0);
    q_cap += std::max(gen.q_max, 0.0);
  }
  const double p_ratio = (p_cap > 0.0) ? std::min(1.0, p_total / p_cap) : 0.0;
  const double q_ratio = (q_cap > 0.0) ? std::min(1.0, q_total / q_cap) : 0.0;
  for (int g = 0; g < G; ++g) {
    const auto& gen = grid_.generators[g];
    y[lay_.p(g)] =
        std::clamp(p_ratio * std::max(gen.p_max, 0.0), gen.p_min, gen.p_max);
    y[lay_.q(g)] =
        std::clamp(q_ratio * std::max(gen.q_max, 0.0), gen.q_min, gen.q_max);
  }

  // Backward sweep: each line carries its subtree's net draw (lossless).
  Eigen::VectorXd net_p(B), net_q(B);
  for (int b = 0; b < B; ++b) {
    net_p[b] = grid_.buses[b].p_load;
    net_q[b] = grid_.buses[b].q_load;
    for (int g : gens_at_[b]) {
      net_p[b] -= y[lay_.p(g)];
      net_q[b] -= y[lay_.q(g)];
    }
  }
  for (auto it = bfs_order_.rbegin(); it != bfs_order_.rend(); ++it) {
    const int b = *it;
    for (int l : lines_out_[b]) {
      // children come later in BFS order, so their subtrees are already folded
      const int child = grid_.lines[l].to_bus;
      y[lay_.P(l)] = net_p[child];
      y[lay_.Q(l)] = net_q[child];
      net_p[b] += net_p[child];
      net_q[b] += net_q[child];
    }
  }

  // Forward sweep for voltages from the substation reference.
  const auto& sub = grid_.buses[grid_.substation];
  y[lay_.v(grid_.substation)] = 0.5 * (sub.v_min + sub.v_max);
  for (int b : bfs_order_) {
    for (int l : lines_out_[b]) {
      const auto& ln = grid_.lines[l];
      y[lay_.v(ln.to_bus)] =
          y[lay_.v(b)] - 2.0 * ln.r * y[lay_.P(l)] - 2.0 * ln.x * y[lay_.Q(l)];
    }
  }
  return prox(y, 0.0);
}

Eigen::VectorXd Dso::reactive_residual(const Eigen::VectorXd& y) const {
  Eigen::VectorXd g(lay_.n_bus);
  for (int b = 0; b < lay_.n_bus; ++b) {
    double acc = grid_.buses[b].q_load;
    for (int l : lines_out_[b]) acc += y[lay_.Q(l)];
    for (int l : lines_in_[b]) acc -= y[lay_.Q(l)];
    for (int gi : gens_at_[b]) acc -= y[lay_.q(gi)];
    g[b] = acc;
  }
  return g;
}

Eigen::VectorXd Dso::voltage_residual(const Eigen::VectorXd& y) const {
  Eigen::VectorXd g(lay_.n_line);
  for (int l = 0; l < lay_.n_line; ++l) {
    const auto& ln = grid_.lines[l];
    g[l] = y[lay_.v(ln.to_bus)] - y[lay_.v(ln.from_bus)] + 2.0 * ln.r * y[lay_.P(l)] +
           2.0 * ln.x * y[lay_.Q(l)];
  }
  return g;
}

Eigen::VectorXd Dso::line_loading(const Eigen::VectorXd& y) const {
  Eigen::VectorXd s(lay_.n_line);
  for (int l = 0; l < lay_.n_line; ++l) s[l] = std::hypot(y[lay_.P(l)], y[lay_.Q(l)]);
  return s;
}

}  // namespace vgwe
