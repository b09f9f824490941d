#pragma once

#include <vector>

#include "mapkit/solvers.hpp"

namespace mapkit {

// Occupation-time tables for a lattice model up to a caller-supplied horizon.
//   overshoot[i] = A_i^up, the law of the first nonnegative level visited
//   phi[m]       = E[L(m, tau_{m+1}^up)], time at the running maximum
//   xi[m]        = E[L(0, tau_m^up)], m >= 1 (xi[0] is the zero matrix)
//   theta[k]     = E[L(0, tau_{-k})], k >= 1, when a route exists
struct TabooTables {
  int horizon = 0;
  Matrix r_tilde;
  std::vector<Matrix> overshoot;
  std::vector<Matrix> phi;
  std::vector<Matrix> xi;
  std::vector<Matrix> theta;
  bool theta_available = false;
  std::string theta_route;  // "occupation" or "scale"
};

// R_tilde = diag(-A_0)^{-1} R diag(-A_0): expected visit counts of the jump
// chain instead of sojourn times.
Matrix r_tilde(const LatticeModel& model, const Matrix& r);
// Residual of the jump-chain equation R~ = A~_{-1} + R~ A~_0 + R~^2 A~_1 + ...
double r_tilde_residual(const LatticeModel& model, const Matrix& r_tilde);

// Backward recursion A_i^up = A~_i + R~ A_{i+1}^up, seeded at i = M.
std::vector<Matrix> overshoot_matrices(const LatticeModel& model, const Matrix& r_tilde);

std::vector<Matrix> phi_matrices(const LatticeModel& model,
                                 const std::vector<Matrix>& overshoot, int horizon);

std::vector<Matrix> xi_matrices(const std::vector<Matrix>& phi, const Matrix& r, int horizon);

// Theta(k) = E[L(0, tau_{-k})]. Prefers the occupation route
// H - G^k P[J_{tau_k}] H (transient); falls back to G^k Xi(k) R^{-k} when
// A_{-1} is nonsingular. Throws NullRecurrentAndSingularA when neither works.
std::vector<Matrix> theta_matrices(const LatticeModel& model, const Fundamentals& fund,
                                   const std::vector<Matrix>& xi, int horizon,
                                   std::string* route = nullptr);

TabooTables build_taboo_tables(const LatticeModel& model, const Fundamentals& fund, int horizon);

}  // namespace mapkit
