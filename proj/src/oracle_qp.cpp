#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vgwe/oracle.hpp"

namespace vgwe::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const QpProblem& p) {
  const auto n = p.h.size();
  if (p.lin.size() != n || p.lo.size() != n || p.hi.size() != n ||
      (p.A.size() != 0 && p.A.cols() != n) || p.b.size() != p.A.rows())
    throw std::invalid_argument("qp oracle: dimension mismatch");
  if ((p.h.array() <= 0.0).any())
    throw std::invalid_argument("qp oracle: Hessian must be positive");
  if ((p.lo.array() > p.hi.array()).any())
    throw std::invalid_argument("qp oracle: empty box");
}

}  // namespace

Eigen::VectorXd qp_active_set(const QpProblem& p, const Eigen::VectorXd& z0) {
  check_problem(p);
  if (!p.discs.empty())
    throw std::invalid_argument("qp_active_set: discs not supported");
  const int n = static_cast<int>(p.h.size());
  const int m = static_cast<int>(p.A.rows());
  if (z0.size() != n) throw std::invalid_argument("qp_active_set: bad start size");

  const double feas_tol = 1e-8 * (1.0 + p.b.cwiseAbs().sum());
  if (m > 0 && (p.A * z0 - p.b).cwiseAbs().maxCoeff() > feas_tol)
    throw std::invalid_argument("qp_active_set: start violates equalities");
  for (int j = 0; j < n; ++j)
    if (z0[j] < p.lo[j] - 1e-9 || z0[j] > p.hi[j] + 1e-9)
      throw std::invalid_argument("qp_active_set: start violates bounds");

  // pin[j]: 0 free, 1 at lower bound, 2 at upper bound.
  std::vector<int> pin(n, 0);
  Eigen::VectorXd z = z0;
  const double dual_tol = 1e-10 * (1.0 + p.lin.cwiseAbs().maxCoeff());

  const int max_iter = 50 * (n + m + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> free_idx;
    for (int j = 0; j < n; ++j)
      if (pin[j] == 0) free_idx.push_back(j);
    const int nf = static_cast<int>(free_idx.size());

    // Equality-constrained subproblem over the free coordinates.
    Eigen::VectorXd z_eqp = z;
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < n; ++j)
      if (pin[j] == 1)
        z_eqp[j] = p.lo[j];
      else if (pin[j] == 2)
        z_eqp[j] = p.hi[j];

    if (nf > 0) {
      Eigen::VectorXd hf(nf), linf(nf);
      for (int k = 0; k < nf; ++k) {
        hf[k] = p.h[free_idx[k]];
        linf[k] = p.lin[free_idx[k]];
      }
      if (m > 0) {
        Eigen::MatrixXd Af(m, nf);
        for (int k = 0; k < nf; ++k) Af.col(k) = p.A.col(free_idx[k]);
        Eigen::VectorXd rhs = p.b;
        for (int j = 0; j < n; ++j)
          if (pin[j] != 0) rhs -= p.A.col(j) * z_eqp[j];
        // (Af H^-1 Af') nu = -rhs - Af H^-1 lin; rows may be dependent, so use
        // a rank-revealing least-squares solve (the system is consistent: the
        // current point is feasible for this subproblem).
        const Eigen::MatrixXd AfH = Af * hf.cwiseInverse().asDiagonal();
        const Eigen::MatrixXd M = AfH * Af.transpose();
        const Eigen::VectorXd rhs2 = -rhs - AfH * linf;
        nu = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(M).solve(rhs2);
        const Eigen::VectorXd zf =
            -(linf + Af.transpose() * nu).cwiseQuotient(hf);
        for (int k = 0; k < nf; ++k) z_eqp[free_idx[k]] = zf[k];
      } else {
        for (int k = 0; k < nf; ++k) z_eqp[free_idx[k]] = -linf[k] / hf[k];
      }
    }

    const Eigen::VectorXd d = z_eqp - z;
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax <= 1e-11 * (1.0 + z.cwiseAbs().maxCoeff())) {
      // Stationary on the working set; check pinned multipliers. For a bound
      // z_j >= lo_j the multiplier is the j-th stationarity component; it
      // must be nonnegative at the lower bound, nonpositive at the upper.
      const Eigen::VectorXd grad =
          p.h.cwiseProduct(z_eqp) + p.lin + (m > 0 ? Eigen::VectorXd(p.A.transpose() * nu)
                                                   : Eigen::VectorXd::Zero(n));
      int worst = -1;
      double worst_val = -dual_tol;
      for (int j = 0; j < n; ++j) {
        if (pin[j] == 0) continue;
        const double mult = (pin[j] == 1) ? grad[j] : -grad[j];
        if (mult < worst_val) {
          worst_val = mult;
          worst = j;
        }
      }
      if (worst < 0) return z_eqp;
      pin[worst] = 0;
      z = z_eqp;
      continue;
    }

    // Step toward the subproblem solution until a bound blocks.
    double alpha = 1.0;
    int blocker = -1, block_side = 0;
    for (int k = 0; k < nf; ++k) {
      const int j = free_idx[k];
      if (d[j] > 0.0 && std::isfinite(p.hi[j])) {
        const double a = (p.hi[j] - z[j]) / d[j];
        if (a < alpha) {
          alpha = a;
          blocker = j;
          block_side = 2;
        }
      } else if (d[j] < 0.0 && std::isfinite(p.lo[j])) {
        const double a = (p.lo[j] - z[j]) / d[j];
        if (a < alpha) {
          alpha = a;
          blocker = j;
          block_side = 1;
        }
      }
    }
    alpha = std::max(alpha, 0.0);
    z += alpha * d;
    if (blocker < 0) {
      z = z_eqp;
      continue;  // full step; optimality gets checked next round
    }
    z[blocker] = (block_side == 1) ? p.lo[blocker] : p.hi[blocker];
    pin[blocker] = block_side;
  }
  throw std::runtime_error("qp_active_set: iteration cap reached");
}

namespace {

// One inequality c(x) <= 0 over the reduced (nullspace) coordinates.
// Boxes are affine; discs are kept quadratic, scaled by 1/(2 radius).
struct Ineq {
  enum Kind { kBoxLo, kBoxHi, kDisc } kind = kBoxLo;
  int j = -1;        // reduced coordinate (boxes)
  double bound = 0;  // lo or hi value
  int a = -1, b = -1;  // reduced coordinates (discs)
  double radius = 0;
};

struct Reduced {
  // z_full = scatter(z_red) with pinned values filled in; z_red = z_p + N w.
  std::vector<int> to_full;      // reduced index -> full index
  Eigen::VectorXd pinned_full;   // full-size, pinned entries set, rest 0
  std::vector<int> to_red;       // full -> reduced or -1
  Eigen::VectorXd zp;            // particular solution, reduced coords
  Eigen::MatrixXd N;             // orthonormal kernel basis, reduced coords
  Eigen::VectorXd h, lin;        // reduced objective data
  std::vector<Ineq> ineqs;
};

Eigen::VectorXd reduced_point(const Reduced& r, const Eigen::VectorXd& w) {
  return r.zp + r.N * w;
}

double ineq_value(const Ineq& q, const Eigen::VectorXd& x) {
  switch (q.kind) {
    case Ineq::kBoxLo: return q.bound - x[q.j];
    case Ineq::kBoxHi: return x[q.j] - q.bound;
    case Ineq::kDisc:
      return (x[q.a] * x[q.a] + x[q.b] * x[q.b] - q.radius * q.radius) /
             (2.0 * q.radius);
  }
  return 0.0;
}

// Gradient with respect to w given x = zp + N w.
Eigen::VectorXd ineq_grad_w(const Ineq& q, const Reduced& r, const Eigen::VectorXd& x) {
  switch (q.kind) {
    case Ineq::kBoxLo: return -r.N.row(q.j).transpose();
    case Ineq::kBoxHi: return r.N.row(q.j).transpose();
    case Ineq::kDisc:
      return (x[q.a] * r.N.row(q.a).transpose() + x[q.b] * r.N.row(q.b).transpose()) /
             q.radius;
  }
  return Eigen::VectorXd::Zero(r.N.cols());
}

void ineq_hess_w(const Ineq& q, const Reduced& r, Eigen::MatrixXd& H, double scale) {
  if (q.kind != Ineq::kDisc) return;
  H.noalias() += (scale / q.radius) * (r.N.row(q.a).transpose() * r.N.row(q.a) +
                                       r.N.row(q.b).transpose() * r.N.row(q.b));
}

Reduced build_reduced(const QpProblem& p) {
  const int n = static_cast<int>(p.h.size());
  Reduced r;
  r.to_red.assign(n, -1);
  r.pinned_full = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (p.lo[j] == p.hi[j]) {
      r.pinned_full[j] = p.lo[j];
    } else {
      r.to_red[j] = static_cast<int>(r.to_full.size());
      r.to_full.push_back(j);
    }
  }
  const int nr = static_cast<int>(r.to_full.size());
  if (nr == 0) throw std::invalid_argument("qp_barrier: all variables pinned");

  r.h.resize(nr);
  r.lin.resize(nr);
  for (int k = 0; k < nr; ++k) {
    r.h[k] = p.h[r.to_full[k]];
    r.lin[k] = p.lin[r.to_full[k]];
  }

  const int m = static_cast<int>(p.A.rows());
  if (m > 0) {
    Eigen::MatrixXd Ar(m, nr);
    for (int k = 0; k < nr; ++k) Ar.col(k) = p.A.col(r.to_full[k]);
    const Eigen::VectorXd br = p.b - p.A * r.pinned_full;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Ar);
    r.zp = cod.solve(br);
    if ((Ar * r.zp - br).cwiseAbs().maxCoeff() >
        1e-7 * (1.0 + br.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("qp_barrier: inconsistent equalities");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Ar);
    const Eigen::MatrixXd K = lu.kernel();
    if (K.cols() == 0 || (K.cols() == 1 && K.isZero(0.0))) {
      r.N = Eigen::MatrixXd::Zero(nr, 0);
    } else {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(K);
      r.N = qr.householderQ() * Eigen::MatrixXd::Identity(nr, K.cols());
    }
  } else {
    r.zp = Eigen::VectorXd::Zero(nr);
    r.N = Eigen::MatrixXd::Identity(nr, nr);
  }

  for (int k = 0; k < nr; ++k) {
    const int j = r.to_full[k];
    if (std::isfinite(p.lo[j])) r.ineqs.push_back({Ineq::kBoxLo, k, p.lo[j], -1, -1, 0});
    if (std::isfinite(p.hi[j])) r.ineqs.push_back({Ineq::kBoxHi, k, p.hi[j], -1, -1, 0});
  }
  for (const Disc& d : p.discs) {
    Ineq q;
    q.kind = Ineq::kDisc;
    q.a = r.to_red[d.a];
    q.b = r.to_red[d.b];
    q.radius = d.radius;
    if (q.a < 0 || q.b < 0)
      throw std::invalid_argument("qp_barrier: disc coordinate pinned");
    r.ineqs.push_back(q);
  }
  return r;
}

// Newton with Levenberg damping and a feasibility-respecting backtracking
// line search; shared by both barrier phases.
bool damped_newton_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                        Eigen::VectorXd& step) {
  const int k = static_cast<int>(g.size());
  double damp = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd Hd = H;
    if (damp > 0.0) Hd += damp * Eigen::MatrixXd::Identity(k, k);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hd);
    if (ldlt.info() == Eigen::Success) {
      step = ldlt.solve(-g);
      if (step.allFinite() && g.dot(step) < 0.0) return true;
    }
    damp = (damp == 0.0) ? 1e-8 * (1.0 + H.diagonal().cwiseAbs().maxCoeff())
                         : damp * 100.0;
  }
  return false;
}

// Phase 1: minimize t*s - sum log(s - c_i(w)) until every c_i is strictly
// negative. Returns false if no strictly feasible point is found.
bool phase1(const Reduced& r, Eigen::VectorXd& w) {
  const int k = static_cast<int>(r.N.cols());
  w = Eigen::VectorXd::Zero(k);
  if (r.ineqs.empty()) return true;

  Eigen::VectorXd x = reduced_point(r, w);
  double cmax = -kInf;
  for (const auto& q : r.ineqs) cmax = std::max(cmax, ineq_value(q, x));
  const double target = -1e-9 * (1.0 + std::abs(cmax));
  if (cmax <= target) return true;
  if (k == 0) return false;

  double s = cmax + 1.0 + 0.1 * std::abs(cmax);
  double t = 1.0;
  for (int outer = 0; outer < 12; ++outer, t *= 10.0) {
    for (int it = 0; it < 200; ++it) {
      x = reduced_point(r, w);
      cmax = -kInf;
      for (const auto& q : r.ineqs) cmax = std::max(cmax, ineq_value(q, x));
      if (cmax <= target) return true;

      Eigen::VectorXd gw = Eigen::VectorXd::Zero(k);
      double gs = t;
      Eigen::MatrixXd Hww = Eigen::MatrixXd::Zero(k, k);
      Eigen::VectorXd Hws = Eigen::VectorXd::Zero(k);
      double Hss = 0.0;
      for (const auto& q : r.ineqs) {
        const double u = s - ineq_value(q, x);
        if (u <= 0.0) return false;  // line search should prevent this
        const Eigen::VectorXd gq = ineq_grad_w(q, r, x);
        gw += gq / u;
        gs -= 1.0 / u;
        Hww.noalias() += gq * gq.transpose() / (u * u);
        ineq_hess_w(q, r, Hww, 1.0 / u);
        Hws -= gq / (u * u);
        Hss += 1.0 / (u * u);
      }
      Eigen::MatrixXd H(k + 1, k + 1);
      H.topLeftCorner(k, k) = Hww;
      H.topRightCorner(k, 1) = Hws;
      H.bottomLeftCorner(1, k) = Hws.transpose();
      H(k, k) = Hss;
      Eigen::VectorXd g(k + 1);
      g << gw, gs;
      if (g.lpNorm<Eigen::Infinity>() <= 1e-12) break;

      Eigen::VectorXd step;
      if (!damped_newton_step(H, g, step)) break;

      // Backtrack keeping s > c_i everywhere.
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        const Eigen::VectorXd w_try = w + alpha * step.head(k);
        const double s_try = s + alpha * step[k];
        const Eigen::VectorXd x_try = reduced_point(r, w_try);
        bool ok = true;
        for (const auto& q : r.ineqs)
          if (s_try - ineq_value(q, x_try) <= 0.0) {
            ok = false;
            break;
          }
        if (!ok) continue;
        w = w_try;
        s = s_try;
        moved = true;
        break;
      }
      if (!moved) break;
    }
    x = reduced_point(r, w);
    cmax = -kInf;
    for (const auto& q : r.ineqs) cmax = std::max(cmax, ineq_value(q, x));
    if (cmax <= target) return true;
  }
  return cmax <= target;
}

double objective(const Reduced& r, const Eigen::VectorXd& x) {
  return 0.5 * x.cwiseProduct(r.h).dot(x) + r.lin.dot(x);
}

// Newton polish on the active-constraint KKT system; returns true and
// overwrites w on success.
bool polish(const Reduced& r, Eigen::VectorXd& w, const std::vector<int>& active,
            Eigen::VectorXd& mu) {
  const int k = static_cast<int>(r.N.cols());
  const int na = static_cast<int>(active.size());
  const Eigen::MatrixXd NtHN =
      r.N.transpose() * r.h.asDiagonal() * r.N;  // constant curvature part
  Eigen::VectorXd w_cur = w, mu_cur = mu;
  for (int it = 0; it < 30; ++it) {
    const Eigen::VectorXd x = reduced_point(r, w_cur);
    Eigen::VectorXd stat = r.N.transpose() * (r.h.cwiseProduct(x) + r.lin);
    Eigen::MatrixXd J(k + na, k + na);
    J.setZero();
    Eigen::MatrixXd Hl = NtHN;
    Eigen::MatrixXd G(na, k);
    Eigen::VectorXd cval(na);
    for (int i = 0; i < na; ++i) {
      const Ineq& q = r.ineqs[active[i]];
      const Eigen::VectorXd gq = ineq_grad_w(q, r, x);
      G.row(i) = gq.transpose();
      cval[i] = ineq_value(q, x);
      stat += mu_cur[i] * gq;
      ineq_hess_w(q, r, Hl, mu_cur[i]);
    }
    Eigen::VectorXd Fv(k + na);
    Fv << stat, cval;
    if (Fv.lpNorm<Eigen::Infinity>() <=
        1e-12 * (1.0 + r.lin.cwiseAbs().maxCoeff()) + 1e-13) {
      w = w_cur;
      mu = mu_cur;
      return true;
    }
    J.topLeftCorner(k, k) = Hl;
    J.topRightCorner(k, na) = G.transpose();
    J.bottomLeftCorner(na, k) = G;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd step = lu.solve(-Fv);
    if (!step.allFinite()) return false;
    w_cur += step.head(k);
    mu_cur += step.tail(na);
  }
  return false;
}

}  // namespace

Eigen::VectorXd qp_barrier(const QpProblem& p) {
  check_problem(p);
  const int n = static_cast<int>(p.h.size());
  Reduced r = build_reduced(p);
  const int k = static_cast<int>(r.N.cols());

  auto scatter = [&](const Eigen::VectorXd& xred) {
    Eigen::VectorXd z = r.pinned_full;
    for (size_t i = 0; i < r.to_full.size(); ++i)
      z[r.to_full[i]] = xred[static_cast<Eigen::Index>(i)];
    return z;
  };

  Eigen::VectorXd w;
  if (!phase1(r, w)) throw std::runtime_error("qp_barrier: infeasible problem");
  if (k == 0 || r.ineqs.empty()) {
    // Fully determined by equalities (or unconstrained in the nullspace):
    // minimize the quadratic over w directly.
    if (k > 0) {
      const Eigen::MatrixXd H = r.N.transpose() * r.h.asDiagonal() * r.N;
      const Eigen::VectorXd g = r.N.transpose() * (r.h.cwiseProduct(r.zp) + r.lin);
      w = Eigen::LDLT<Eigen::MatrixXd>(H).solve(-g);
    }
    return scatter(reduced_point(r, w));
  }

  const int m_ineq = static_cast<int>(r.ineqs.size());
  const Eigen::MatrixXd NtHN = r.N.transpose() * r.h.asDiagonal() * r.N;

  // Characteristic coordinate scale; all absolute thresholds below follow it.
  double scale_z = 1.0 + r.zp.cwiseAbs().maxCoeff();
  for (const auto& q : r.ineqs)
    if (q.kind != Ineq::kDisc) scale_z = std::max(scale_z, 1.0 + std::abs(q.bound));

  // Push the barrier until every complementarity product 1/t is negligible
  // against the coordinate scale; the polish below then sharpens actives.
  const double t_stop =
      std::max(1e10, static_cast<double>(m_ineq) / (1e-12 * scale_z));
  double t = 1.0;
  while (true) {
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd x = reduced_point(r, w);
      Eigen::VectorXd g = t * (r.N.transpose() * (r.h.cwiseProduct(x) + r.lin));
      Eigen::MatrixXd H = t * NtHN;
      for (const auto& q : r.ineqs) {
        const double c = ineq_value(q, x);
        const Eigen::VectorXd gq = ineq_grad_w(q, r, x);
        g += gq / (-c);
        H.noalias() += gq * gq.transpose() / (c * c);
        ineq_hess_w(q, r, H, 1.0 / (-c));
      }
      Eigen::VectorXd step;
      if (!damped_newton_step(H, g, step)) break;
      if (step.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + w.lpNorm<Eigen::Infinity>()))
        break;

      double alpha = 1.0;
      bool moved = false;
      const double f0 = t * objective(r, x) -
                        [&] {
                          double acc = 0.0;
                          for (const auto& q : r.ineqs)
                            acc += std::log(-ineq_value(q, x));
                          return acc;
                        }();
      const double slope = g.dot(step);
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        const Eigen::VectorXd w_try = w + alpha * step;
        const Eigen::VectorXd x_try = reduced_point(r, w_try);
        bool interior = true;
        double logacc = 0.0;
        for (const auto& q : r.ineqs) {
          const double c = ineq_value(q, x_try);
          if (c >= 0.0) {
            interior = false;
            break;
          }
          logacc += std::log(-c);
        }
        if (!interior) continue;
        const double f_try = t * objective(r, x_try) - logacc;
        if (f_try <= f0 + 1e-4 * alpha * slope) {
          w = w_try;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (t >= t_stop) break;
    t = std::min(t * 10.0, t_stop);
  }

  // Try progressively tighter active-set guesses; accept the first polished
  // point that verifies. A failed polish falls back to the barrier point,
  // whose complementarity error is already below 1/t_stop.
  const Eigen::VectorXd x = reduced_point(r, w);
  Eigen::VectorXd mu0(m_ineq);
  for (int i = 0; i < m_ineq; ++i)
    mu0[i] = 1.0 / (t * std::max(-ineq_value(r.ineqs[i], x), 1e-300));

  for (const double band : {1e-5, 1e-7, 1e-9}) {
    std::vector<int> active;
    for (int i = 0; i < m_ineq; ++i)
      if (ineq_value(r.ineqs[i], x) > -band * scale_z) active.push_back(i);
    Eigen::VectorXd w_pol = w;
    Eigen::VectorXd mu(static_cast<Eigen::Index>(active.size()));
    for (size_t i = 0; i < active.size(); ++i)
      mu[static_cast<Eigen::Index>(i)] = mu0[active[i]];
    if (!polish(r, w_pol, active, mu)) continue;
    const Eigen::VectorXd x_pol = reduced_point(r, w_pol);
    bool ok = (mu.size() == 0) || (mu.minCoeff() >= -1e-10);
    for (int i = 0; ok && i < m_ineq; ++i)
      if (ineq_value(r.ineqs[i], x_pol) > 1e-9 * scale_z) ok = false;
    if (ok) return scatter(x_pol);
  }
  (void)n;
  return scatter(x);
}

Eigen::VectorXd qp_solve(const QpProblem& p, const Eigen::VectorXd* z0) {
  if (p.discs.empty() && z0 != nullptr) return qp_active_set(p, *z0);
  return qp_barrier(p);
}

}  // namespace vgwe::oracle
