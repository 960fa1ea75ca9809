#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <limits>
#include <vector>

#include "vgwe/diag_qp.hpp"
#include "vgwe/oracle.hpp"
#include "vgwe/rng.hpp"

using vgwe::DetRng;
using vgwe::DiagQp;
using vgwe::DiagQpResult;
using vgwe::Disc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::SparseMatrix<double> dense_to_sparse(const Eigen::MatrixXd& A) {
  Eigen::SparseMatrix<double> S(A.rows(), A.cols());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (A(i, j) != 0.0) trip.emplace_back(i, j, A(i, j));
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}
}  // namespace

TEST_CASE("unconstrained rows reduce to a clamp") {
  const int n = 4;
  DiagQp qp;
  Eigen::VectorXd h = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd lo(n), hi(n);
  lo << 0.0, -1.0, 0.0, -kInf;
  hi << 1.0, 1.0, 0.5, kInf;
  qp.setup(Eigen::SparseMatrix<double>(0, n), h, lo, hi);

  Eigen::VectorXd v(n);
  v << 2.0, -3.0, 0.25, 7.5;
  DiagQpResult res = qp.solve(-v, Eigen::VectorXd(0), 1e-12, 10);
  CHECK(res.converged);
  CHECK(qp.z()[0] == 1.0);
  CHECK(qp.z()[1] == -1.0);
  CHECK(qp.z()[2] == 0.25);
  CHECK(qp.z()[3] == 7.5);
}

TEST_CASE("disc pairs shrink radially") {
  DiagQp qp;
  Eigen::VectorXd h = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, kInf);
  qp.setup(Eigen::SparseMatrix<double>(0, 2), h, lo, hi, {{0, 1, 2.5}});

  Eigen::VectorXd v(2);
  v << 3.0, 4.0;
  qp.solve(-v, Eigen::VectorXd(0), 1e-12, 10);
  CHECK(qp.z()[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(qp.z()[1] == doctest::Approx(2.0).epsilon(1e-12));

  v << 0.3, -0.4;  // already inside
  qp.solve(-v, Eigen::VectorXd(0), 1e-12, 10);
  CHECK(qp.z()[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(qp.z()[1] == doctest::Approx(-0.4).epsilon(1e-12));
}

TEST_CASE("simplex projection matches the closed form") {
  // Project v onto {z >= 0, sum z = 1}: the classic water-filling answer.
  const int n = 2;
  Eigen::MatrixXd A(1, n);
  A << 1.0, 1.0;
  DiagQp qp;
  qp.setup(dense_to_sparse(A), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n),
           Eigen::VectorXd::Constant(n, kInf));

  Eigen::VectorXd v(n), b(1);
  v << 2.0, 0.5;
  b << 1.0;
  DiagQpResult res = qp.solve(-v, b, 1e-11, 20000);
  CHECK(res.converged);
  // Equal shift hits the floor for the small coordinate: (1, 0).
  CHECK(qp.z()[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(qp.z()[1] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(std::abs(qp.z().sum() - 1.0) <= 1e-10);
}

TEST_CASE("curvature weights the pull toward the center") {
  // minimize 1/2 (2 z0^2 + z1^2) - (2 z0 + 2 z1)  s.t.  z0 + z1 = 1.
  // Stationarity: 2 z0 - 2 + nu = 0, z1 - 2 + nu = 0 -> z = ((1-nu/2)... solved
  // by hand: z0 = (2-nu)/2, z1 = 2-nu, sum = 3(2-nu)/2 = 1 -> nu = 4/3.
  Eigen::MatrixXd A(1, 2);
  A << 1.0, 1.0;
  Eigen::VectorXd h(2);
  h << 2.0, 1.0;
  DiagQp qp;
  qp.setup(dense_to_sparse(A), h, Eigen::VectorXd::Constant(2, -kInf),
           Eigen::VectorXd::Constant(2, kInf));
  Eigen::VectorXd lin(2), b(1);
  lin << -2.0, -2.0;
  b << 1.0;
  DiagQpResult res = qp.solve(lin, b, 1e-12, 20000);
  CHECK(res.converged);
  CHECK(qp.z()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(qp.z()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("iterates stay feasible even before convergence") {
  Eigen::MatrixXd A(2, 5);
  A << 1, 1, 1, 0, 0,
       0, 0, 1, 1, 1;
  DiagQp qp;
  qp.setup(dense_to_sparse(A), Eigen::VectorXd::Ones(5), Eigen::VectorXd::Zero(5),
           Eigen::VectorXd::Ones(5));
  Eigen::VectorXd lin = Eigen::VectorXd::Constant(5, -3.0);
  Eigen::VectorXd b(2);
  b << 1.0, 1.0;
  qp.solve(lin, b, 1e-30, 3);  // forced early stop
  CHECK((qp.z().array() >= -1e-15).all());
  CHECK((qp.z().array() <= 1.0 + 1e-15).all());
}

TEST_CASE("warm starts reuse the multipliers") {
  Eigen::MatrixXd A(1, 3);
  A << 1.0, 1.0, 1.0;
  DiagQp qp;
  qp.setup(dense_to_sparse(A), Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3),
           Eigen::VectorXd::Constant(3, kInf));
  Eigen::VectorXd lin(3), b(1);
  lin << -0.9, -0.4, -0.1;
  b << 1.0;

  DiagQpResult cold = qp.solve(lin, b, 1e-11, 50000);
  REQUIRE(cold.converged);
  Eigen::VectorXd first = qp.z();

  DiagQpResult warm = qp.solve(lin, b, 1e-11, 50000);
  CHECK(warm.converged);
  CHECK(warm.iterations <= cold.iterations);
  CHECK((qp.z() - first).lpNorm<Eigen::Infinity>() <= 1e-9);

  qp.reset_warm();
  DiagQpResult reset = qp.solve(lin, b, 1e-11, 50000);
  CHECK(reset.converged);
  CHECK((qp.z() - first).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("random feasible instances agree with the dense solver") {
  DetRng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6;
    const int m = 2;
    Eigen::MatrixXd A(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd lo(n), hi(n), h(n), lin(n), z0(n);
    for (int j = 0; j < n; ++j) {
      lo[j] = rng.uniform(-2.0, 0.0);
      hi[j] = lo[j] + rng.uniform(0.5, 3.0);
      h[j] = rng.uniform(0.5, 4.0);
      lin[j] = rng.uniform(-2.0, 2.0);
      z0[j] = rng.uniform(lo[j], hi[j]);
    }
    Eigen::VectorXd b = A * z0;  // consistent by construction

    DiagQp qp;
    qp.setup(dense_to_sparse(A), h, lo, hi);
    DiagQpResult res = qp.solve(lin, b, 1e-11, 200000);
    REQUIRE(res.converged);

    vgwe::oracle::QpProblem prob;
    prob.A = A;
    prob.b = b;
    prob.h = h;
    prob.lin = lin;
    prob.lo = lo;
    prob.hi = hi;
    Eigen::VectorXd ref = vgwe::oracle::qp_active_set(prob, z0);
    CHECK((qp.z() - ref).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}
