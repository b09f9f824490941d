#pragma once

#include <optional>
#include <vector>

#include "mapkit/taboo.hpp"

namespace mapkit {

struct ExitLaw {
  long a = 0;
  long b = 0;
  Matrix D;  // P[tau_{-a} < tau_b^up, J_{tau_{-a}}]
};

// Lattice scale matrices W(1..K); only defined when A_{-1} is nonsingular.
struct ScaleTable {
  int horizon = 0;
  std::vector<Matrix> w;  // w[k] = W(k); w[0] is the zero matrix

  const Matrix& operator()(long k) const { return w[static_cast<size_t>(std::max<long>(k, 0))]; }
};

struct TransformCheck {
  double z = 0.0;
  double residual = 0.0;
  double tail_bound = 0.0;
  int terms = 0;

  bool ok(double slack = 1e-8) const { return residual <= tail_bound + slack; }
};

struct DecayDiagnostic {
  std::vector<double> xi_k;        // spectral radii of P[J_{tau_k}], k = 1..K
  double xi_star_estimate = 0.0;   // xi_K^{1/K}
  double phi_estimate = 0.0;       // sup of the valid transform region (NaN if empty)
  bool region_found = false;
  double product = 0.0;            // xi_star_estimate * phi_estimate
  bool product_within_5pct = false;
};

// D_{a,b} = Xi(b) R^a Xi(a+b)^{-1} for b >= 1; D_{a,0} = 0, D_{0,0} = I.
ExitLaw two_sided_exit(const LatticeModel& model, const TabooTables& tables, const Matrix& r,
                       long a, long b);

// W(1) = A_{-1}^{-1}, W(k+1) = -A_{-1}^{-1} sum_{nu<=k} A_{k-nu} W(nu).
// Throws SingularAminus1 when the pivot check fails (rank-deficient A_{-1}).
ScaleTable scale_matrices(const LatticeModel& model, int horizon);

// Partial sums of sum_k W(k) z^k against z F(z)^{-1}; valid for
// |z| < min |sp(G)|.
TransformCheck check_scale_transform(const LatticeModel& model, const ScaleTable& table,
                                     const Matrix& g, double z);

// Bilateral occupation transform sum_k z^k H(k) = -z F(z)^{-1}; needs every
// eigenvalue of F(z)/z in the open left half plane.
TransformCheck check_H_transform_bilateral(const LatticeModel& model, const Fundamentals& fund,
                                           double z);
// Unilateral variant, valid on the whole punctured unit disk minus sp(G).
TransformCheck check_H_transform_unilateral(const LatticeModel& model, const Fundamentals& fund,
                                            double z);
// Scan (rho(G), 1) for a z where the bilateral hypothesis holds.
std::optional<double> find_bilateral_z(const LatticeModel& model, const Fundamentals& fund);

// P[tau_m = tau_m^up, J_{tau_m}] = Phi(m) Phi(0)^{-1}
Matrix creeping(const TabooTables& tables, long m);
// Scale-matrix form (W(m+1) - W(m) R^{-1}) W(1)^{-1}
Matrix creeping_scale_form(const ScaleTable& table, const Matrix& r, long m);

// P[tau_m < tau_{m+l}^up, J_{tau_m}]
Matrix hit_before_upcross(const TabooTables& tables, const Matrix& r, long m, long l);
Matrix hit_before_upcross_scale_form(const ScaleTable& table, const Matrix& r, long m, long l);

// E[L(k, tau_{-l} /\ tau_m^up)] for -l < k < m; prefers the occupation route,
// falls back to the scale route, NoValidRoute when neither applies.
Matrix strip_occupation(const LatticeModel& model, const Fundamentals& fund,
                        const TabooTables& tables, long k, long l, long m);
Matrix strip_occupation_transient(const LatticeModel& model, const Fundamentals& fund,
                                  const TabooTables& tables, long k, long l, long m);
Matrix strip_occupation_scale(const ScaleTable& table, long k, long l, long m);

// Exit law over the upper boundary: P[tau_m^up < tau_{-l}, X = m+u, J].
Matrix exit_overshoot(const LatticeModel& model, const Fundamentals& fund,
                      const TabooTables& tables, long l, long m, long u);

// Alternative D_{a,b} forms used as cross-checks (nonsingular A_{-1}).
Matrix d_ab_scale_form(const ScaleTable& table, long a, long b);
Matrix d_ab_theta_form(const TabooTables& tables, const Matrix& g, long a, long b);

DecayDiagnostic decay_diagnostic(const LatticeModel& model, const Fundamentals& fund, int k_max);

}  // namespace mapkit
