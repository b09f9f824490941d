#pragma once

#include <doctest.h>

#include <Eigen/Dense>

#include "mapkit/linalg.hpp"
#include "mapkit/model.hpp"

namespace mapkit::testing {

// birth-death chain: up rate lambda, down rate mu_tilde, optional killing
inline LatticeModel bd(double lambda, double mu_tilde, double kill = 0.0) {
  Matrix down(1, 1), mid(1, 1), up(1, 1);
  down << mu_tilde;
  mid << -(lambda + mu_tilde + kill);
  up << lambda;
  return LatticeModel::create({down, mid, up});
}

// N=1 with only A_{-1} and A_0; defective when kill > 0
inline LatticeModel pure_death(double rate, double kill) {
  Matrix down(1, 1), mid(1, 1);
  down << rate;
  mid << -(rate + kill);
  return LatticeModel::create({down, mid});
}

// M/E2/1-type chain: service in two stages, so A_{-1} has rank 1
inline LatticeModel mph1(double lambda, double s) {
  Matrix down(2, 2), mid(2, 2), up(2, 2);
  down << 0, 0, s, 0;
  mid << -(lambda + s), s, 0, -(lambda + s);
  up << lambda, 0, 0, lambda;
  return LatticeModel::create({down, mid, up});
}

// designated 3-phase fully killed model
inline LatticeModel three_phase_defective() {
  Matrix down(3, 3), mid(3, 3), up(3, 3);
  down << 0.8, 0.2, 0.1, 0.3, 0.9, 0.2, 0.2, 0.4, 1.0;
  up << 0.3, 0.1, 0.2, 0.2, 0.3, 0.1, 0.1, 0.2, 0.3;
  mid << 0, 0.4, 0.3, 0.5, 0, 0.3, 0.2, 0.6, 0;
  Vector kill(3);
  kill << 0.3, 0.25, 0.2;
  Matrix total = down + mid + up;
  mid.diagonal() = -(total.rowwise().sum() + kill);
  return LatticeModel::create({down, mid, up});
}

// designated 2-phase model with jumps of size up to 2, non-defective, mu < 0
inline LatticeModel two_phase_m2() {
  Matrix down(2, 2), mid(2, 2), up1(2, 2), up2(2, 2);
  down << 1.2, 0.4, 0.5, 1.5;
  up1 << 0.25, 0.1, 0.15, 0.3;
  up2 << 0.1, 0.05, 0.08, 0.12;
  mid << 0, 0.3, 0.4, 0;
  Matrix total = down + mid + up1 + up2;
  mid.diagonal() = -total.rowwise().sum();
  return LatticeModel::create({down, mid, up1, up2});
}

inline MmbmModel scalar_mmbm(double a, double s2, double kill) {
  Vector av(1), sv(1);
  av << a;
  sv << s2;
  Matrix q(1, 1);
  q << -kill;
  return MmbmModel::create(av, sv, q);
}

// designated 2-phase all-Brownian model, defective, gentle spectrum
inline MmbmModel two_phase_mmbm() {
  Vector a(2), s2(2);
  a << -0.2, 0.08;
  s2 << 1.6, 1.3;
  Matrix q(2, 2);
  q << -0.21, 0.16, 0.2, -0.24;
  return MmbmModel::create(a, s2, q);
}

// Independent oracle: expected occupation time of (k, j) before leaving the
// open strip (-l, m), computed from the fundamental matrix of the censored
// chain. Exact up to one dense LU solve.
inline Matrix brute_strip_occupation(const LatticeModel& model, long k, long l, long m) {
  const int n = model.phases();
  const long lo = -l + 1;
  const long hi = m - 1;
  const long width = hi - lo + 1;
  auto id = [&](long x, int i) { return static_cast<Eigen::Index>((x - lo) * n + i); };

  Matrix generator = Matrix::Zero(width * n, width * n);
  for (long x = lo; x <= hi; ++x) {
    for (int jump = -1; jump <= model.max_jump(); ++jump) {
      const long y = x + jump;
      const Matrix& block = model.block(jump);
      for (int i = 0; i < n; ++i) {
        if (jump == 0) generator(id(x, i), id(x, i)) += block(i, i);
        if (y < lo || y > hi) continue;
        for (int j = 0; j < n; ++j) {
          if (jump == 0 && i == j) continue;
          generator(id(x, i), id(y, j)) += block(i, j);
        }
      }
    }
  }
  const Matrix occupancy = lu_inverse(Matrix(-generator));
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out(i, j) = occupancy(id(0, i), id(k, j));
  }
  return out;
}

// Brute-force exit law P[tau_{-a} before tau_b^up, J] by absorbing-state
// linear algebra on the strip.
inline Matrix brute_exit(const LatticeModel& model, long a, long b) {
  const int n = model.phases();
  if (b == 0) return a == 0 ? Matrix(Matrix::Identity(n, n)) : Matrix(Matrix::Zero(n, n));
  if (a == 0) return Matrix::Identity(n, n);
  const long lo = -a + 1;
  const long hi = b - 1;
  const long width = hi - lo + 1;
  auto id = [&](long x, int i) { return static_cast<Eigen::Index>((x - lo) * n + i); };

  Matrix generator = Matrix::Zero(width * n, width * n);
  Matrix to_target = Matrix::Zero(width * n, n);  // rates into level -a
  for (long x = lo; x <= hi; ++x) {
    for (int jump = -1; jump <= model.max_jump(); ++jump) {
      const long y = x + jump;
      const Matrix& block = model.block(jump);
      for (int i = 0; i < n; ++i) {
        if (jump == 0) generator(id(x, i), id(x, i)) += block(i, i);
        if (y == -a) {
          for (int j = 0; j < n; ++j) to_target(id(x, i), j) += block(i, j);
          continue;
        }
        if (y < lo || y > hi) continue;
        for (int j = 0; j < n; ++j) {
          if (jump == 0 && i == j) continue;
          generator(id(x, i), id(y, j)) += block(i, j);
        }
      }
    }
  }
  const Matrix prob = lu_solve(Matrix(-generator), to_target);
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) out.row(i) = prob.row(id(0, i));
  return out;
}

inline void check_close(const Matrix& actual, const Matrix& expected, double tol) {
  REQUIRE(actual.rows() == expected.rows());
  REQUIRE(actual.cols() == expected.cols());
  CHECK(inf_norm(actual - expected) <= tol);
}

}  // namespace mapkit::testing
