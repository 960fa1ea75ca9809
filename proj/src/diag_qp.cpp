#include "vgwe/diag_qp.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vgwe {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void DiagQp::setup(Eigen::SparseMatrix<double> A, Eigen::VectorXd h, Eigen::VectorXd lo,
                   Eigen::VectorXd hi, std::vector<Disc> discs) {
  if (h.size() != A.cols() || lo.size() != A.cols() || hi.size() != A.cols())
    throw std::invalid_argument("DiagQp: dimension mismatch");
  if ((h.array() <= 0.0).any()) throw std::invalid_argument("DiagQp: h must be positive");
  if ((lo.array() > hi.array()).any())
    throw std::invalid_argument("DiagQp: empty box");
  for (const Disc& d : discs) {
    if (d.a < 0 || d.b < 0 || d.a >= A.cols() || d.b >= A.cols() || d.a == d.b ||
        d.radius < 0.0)
      throw std::invalid_argument("DiagQp: bad disc");
    if (h[d.a] != h[d.b])
      throw std::invalid_argument("DiagQp: disc pair needs equal curvature");
    // Disc coordinates must not also carry finite box bounds; the projection
    // onto the intersection would no longer be closed form.
    if (lo[d.a] != -kInf || lo[d.b] != -kInf || hi[d.a] != kInf || hi[d.b] != kInf)
      throw std::invalid_argument("DiagQp: disc pair must be box-free");
  }

  A_ = std::move(A);
  A_.makeCompressed();
  At_ = A_.transpose();
  At_.makeCompressed();
  h_ = std::move(h);
  lo_ = std::move(lo);
  hi_ = std::move(hi);
  discs_ = std::move(discs);

  const auto n = A_.cols();
  const auto m = A_.rows();
  z_.resize(n);
  atnu_.resize(n);
  grad_.resize(m);
  nu_ = Eigen::VectorXd::Zero(m);
  nu_prev_.resize(m);
  nu_acc_.resize(m);

  refresh_step();
}

void DiagQp::set_h(Eigen::VectorXd h) {
  if (h.size() != h_.size()) throw std::invalid_argument("DiagQp: h size changed");
  if ((h.array() <= 0.0).any()) throw std::invalid_argument("DiagQp: h must be positive");
  for (const Disc& d : discs_)
    if (h[d.a] != h[d.b])
      throw std::invalid_argument("DiagQp: disc pair needs equal curvature");
  h_ = std::move(h);
  refresh_step();
}

void DiagQp::refresh_step() {
  const auto m = A_.rows();
  if (m == 0) {
    step_ = 0.0;
    return;
  }
  // Power iteration on M = A diag(1/h) A'. Deterministic start with a mild
  // ramp so we are not orthogonal to the top eigenvector by symmetry.
  Eigen::VectorXd w(m), u(A_.cols());
  for (Eigen::Index i = 0; i < m; ++i) w[i] = 1.0 + 1e-3 * static_cast<double>(i % 17);
  w.normalize();
  double lam = 0.0;
  for (int it = 0; it < 80; ++it) {
    u.noalias() = At_ * w;
    u.array() /= h_.array();
    w.noalias() = A_ * u;
    lam = w.norm();
    if (lam <= 0.0) break;
    w /= lam;
  }
  if (lam <= 0.0) {
    // A is the zero map: the dual gradient is constant, any step works.
    step_ = 1.0;
  } else {
    step_ = 1.0 / (1.02 * lam);
  }
}

void DiagQp::recover_primal(const Eigen::VectorXd& nu, const Eigen::VectorXd& lin) {
  atnu_.noalias() = At_ * nu;
  z_ = (-(lin + atnu_).array() / h_.array())
           .max(lo_.array())
           .min(hi_.array())
           .matrix();
  for (const Disc& d : discs_) {
    const double r = std::hypot(z_[d.a], z_[d.b]);
    if (r > d.radius) {
      const double s = (r > 0.0) ? d.radius / r : 0.0;
      z_[d.a] *= s;
      z_[d.b] *= s;
    }
  }
}

DiagQpResult DiagQp::solve(const Eigen::VectorXd& lin, const Eigen::VectorXd& b, double eps,
                           int max_iter) {
  if (lin.size() != h_.size() || b.size() != A_.rows())
    throw std::invalid_argument("DiagQp::solve: dimension mismatch");

  DiagQpResult res;
  if (A_.rows() == 0) {
    recover_primal(nu_, lin);
    res.converged = true;
    return res;
  }

  nu_prev_ = nu_;
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    nu_acc_ = nu_ + beta * (nu_ - nu_prev_);

    recover_primal(nu_acc_, lin);
    grad_.noalias() = A_ * z_;
    grad_ -= b;

    res.residual = grad_.lpNorm<Eigen::Infinity>();
    res.iterations = it;
    if (res.residual <= eps) {
      // z_ is the exact minimizer for nu_acc_, so it is already box- and
      // disc-feasible; keep the multipliers that produced it.
      nu_ = nu_acc_;
      res.converged = true;
      return res;
    }

    nu_prev_ = nu_;
    nu_ = nu_acc_ + step_ * grad_;

    // Adaptive restart: drop momentum when it opposes the ascent direction.
    if (grad_.dot(nu_ - nu_prev_) < 0.0) {
      t = 1.0;
      nu_prev_ = nu_;
    } else {
      t = t_next;
    }
  }

  recover_primal(nu_, lin);
  grad_.noalias() = A_ * z_;
  grad_ -= b;
  res.residual = grad_.lpNorm<Eigen::Infinity>();
  res.iterations = max_iter;
  res.converged = res.residual <= eps;
  return res;
}

}  // namespace vgwe
