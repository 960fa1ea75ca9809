#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

// Solver for strictly convex separable QPs
//
//   minimize   1/2 z' diag(h) z + lin' z
//   subject to A z = b,  lo <= z <= hi,  and optional per-pair disc
//              constraints z_a^2 + z_b^2 <= radius^2 (h_a == h_b required).
//
// Method: accelerated gradient ascent on the dual of the equality block.
// Given multipliers nu the inner minimizer is a componentwise clamp (and a
// disc projection for paired coordinates), so iterates are always exactly
// box- and disc-feasible; the returned KKT residual is the remaining
// equality violation max|A z - b|. The dual step is 1/lambda_max(A H^-1 A'),
// estimated once per structure by power iteration.

namespace vgwe {

struct Disc {
  int a = -1;
  int b = -1;
  double radius = 0.0;
};

struct DiagQpResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

class DiagQp {
public:
  void setup(Eigen::SparseMatrix<double> A, Eigen::VectorXd h, Eigen::VectorXd lo,
             Eigen::VectorXd hi, std::vector<Disc> discs = {});

  // Replaces the Hessian diagonal (same sparsity) and refreshes the step.
  void set_h(Eigen::VectorXd h);

  // Warm-starts from the previous call's multipliers; call reset_warm() to
  // discard them.
  DiagQpResult solve(const Eigen::VectorXd& lin, const Eigen::VectorXd& b, double eps,
                     int max_iter);

  void reset_warm() { nu_.setZero(); }

  const Eigen::VectorXd& z() const { return z_; }
  const Eigen::VectorXd& nu() const { return nu_; }
  void set_nu(const Eigen::VectorXd& nu) { nu_ = nu; }
  double dual_step() const { return step_; }
  int rows() const { return static_cast<int>(A_.rows()); }
  int cols() const { return static_cast<int>(A_.cols()); }

private:
  void recover_primal(const Eigen::VectorXd& nu, const Eigen::VectorXd& lin);
  void refresh_step();

  Eigen::SparseMatrix<double> A_;   // column-major
  Eigen::SparseMatrix<double> At_;  // cached transpose
  Eigen::VectorXd h_, lo_, hi_;
  std::vector<Disc> discs_;
  double step_ = 0.0;

  Eigen::VectorXd nu_;           // persistent warm-start multipliers
  Eigen::VectorXd z_, atnu_, grad_, nu_prev_, nu_acc_;
};

}  // namespace vgwe
