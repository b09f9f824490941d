#pragma once

#include "mapkit/solvers.hpp"

namespace mapkit {

// Fluctuation quantities for an all-Brownian MMBM. Construction requires
// sigma^2 > 0 in every phase and a transient regime (finite H).
struct MmbmFluct {
  MmbmModel model;
  Fundamentals fund;

  const Matrix& G() const { return fund.G; }
  const Matrix& Lambda() const { return fund.Lambda; }
  const Matrix& R() const { return fund.R; }
  const Matrix& H() const { return fund.H; }
};

MmbmFluct build_mmbm_fluct(const MmbmModel& model, const SolveOptions& opts = {});

// W(x) = (e^{-Gx} - e^{Lambda x}) H, nonsingular for x > 0.
Matrix mmbm_scale(const MmbmFluct& fluct, double x);
// W'(x) = (-G e^{-Gx} - Lambda e^{Lambda x}) H
Matrix mmbm_scale_derivative(const MmbmFluct& fluct, double x);

// P[tau_{-a} < tau_b^+, J] = W(b) W(a+b)^{-1}
Matrix mmbm_exit(const MmbmFluct& fluct, double a, double b);

// P[J at first hitting of x] for any real x: e^{Lambda x} above, e^{-Gx}... see
// the one-sided passage laws; x <= 0 uses G, x > 0 uses Lambda.
Matrix mmbm_hitting(const MmbmFluct& fluct, double x);

// || (W'(x) + W(x) R) 1/2 diag(sigma^2) - e^{Lambda x} ||_inf; the creeping
// limit identity, valid when every phase is Brownian.
double mmbm_creeping_identity(const MmbmFluct& fluct, double x);

struct QuadratureCheck {
  double alpha = 0.0;
  double upper_limit = 0.0;
  double residual = 0.0;
};

// Numerical check of int_0^inf e^{alpha x} W(x) dx = F(alpha)^{-1} for
// alpha < min Re sp(G), by adaptive Simpson quadrature on [0, X].
QuadratureCheck mmbm_transform_check(const MmbmFluct& fluct);

}  // namespace mapkit
