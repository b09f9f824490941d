#pragma once

#include <map>
#include <string>
#include <vector>

#include "mapkit/model.hpp"

namespace mapkit {

enum class SolveMethod { FixedPoint };

struct SolveOptions {
  double tol = 1e-12;        // residual tolerance, not iterate delta
  long max_iter = 1'000'000;
  double drift_tol = kDriftTol;
  SolveMethod method = SolveMethod::FixedPoint;
};

// The fundamental matrices of a model, together with the solver residuals
// that certify them. For lattice models the pipeline byproducts needed by
// the occupation-time machinery (R_tilde and the overshoot matrices) are
// kept as well.
struct Fundamentals {
  Regime regime;
  Matrix G;
  Matrix R;
  Matrix H;          // empty when the process is null recurrent
  bool H_finite = false;
  Matrix Lambda;     // MMBM upward-passage generator; empty for lattice models
  Matrix R_tilde;                 // lattice only
  std::vector<Matrix> overshoot;  // lattice only: A_0^up .. A_M^up
  std::map<std::string, double> residuals;
};

// --- lattice -------------------------------------------------------------

// Minimal non-negative solution of A_{-1} + A_0 G + A_1 G^2 + ... = 0 by
// monotone fixed-point iteration from G = 0.
Matrix solve_G_lattice(const LatticeModel& model, const SolveOptions& opts = {});

// R from time-reversal duality, R = diag(pi)^{-1} G_hat^T diag(pi), where
// G_hat solves the reversed model. The direct equation residual
// ||A_{-1} + R A_0 + R^2 A_1 + ...|| is certified to 10*tol.
Matrix solve_R_lattice(const LatticeModel& model, const Matrix& g_of_reverse,
                       const Vector& pi, const SolveOptions& opts = {});

// Expected total occupation time of level 0, H = (I - U)^{-1} diag(-A_0)^{-1}
// with U = sum_i A_i^up G^i. Throws NullRecurrent when H is infinite.
Matrix solve_H_lattice(const LatticeModel& model, const Matrix& g,
                       const std::vector<Matrix>& overshoot, const Regime& regime);

// H(k) = E[L(k, infinity)]: G^{|k|} H below zero, a triangular recursion
// through the overshoot matrices above zero.
Matrix occupation_at_level(const LatticeModel& model, const Fundamentals& fund, long k);
// H(0..kmax) in one sweep.
std::vector<Matrix> occupation_levels(const LatticeModel& model, const Fundamentals& fund,
                                      long kmax);

// P[J at first hitting of level k]: G^{|k|} for k <= 0, H(k) H^{-1} for k > 0.
Matrix hitting_matrix(const LatticeModel& model, const Fundamentals& fund, long k);

// Full lattice pipeline: G, reversed-model G, R, R_tilde, overshoot, H.
Fundamentals compute_fundamentals(const LatticeModel& model, const SolveOptions& opts = {});

// --- MMBM ----------------------------------------------------------------

// Right solution of 1/2 diag(sigma^2) G^2 + diag(a) G + Q = 0 by fixed point
// on G = -(diag(a) + 1/2 diag(sigma^2) G)^{-1} Q.
Matrix solve_G_mmbm(const MmbmModel& model, const SolveOptions& opts = {});

// Generator of the phase process at first passage upwards: the G matrix of
// the level-negated model. Requires every phase of -X to satisfy the
// no-subordinator assumption.
Matrix solve_Lambda_mmbm(const MmbmModel& model, const SolveOptions& opts = {});

Matrix solve_R_mmbm(const MmbmModel& model, const Matrix& g_of_reverse, const Vector& pi,
                    const SolveOptions& opts = {});

// H from the bilateral transform: [(aI-G)^{-1} - (aI+Lambda)^{-1}] H = -F(a)^{-1},
// solved at a scanned real alpha and cross-checked at a second one.
Matrix solve_H_mmbm(const MmbmModel& model, const Matrix& g, const Matrix& lambda,
                    const Regime& regime, double* alpha_independence = nullptr);

Fundamentals compute_fundamentals(const MmbmModel& model, const SolveOptions& opts = {});

}  // namespace mapkit
