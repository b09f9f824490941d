#include "mapkit/mmbm.hpp"

#include <cmath>
#include <functional>

#include "mapkit/linalg.hpp"

namespace mapkit {

MmbmFluct build_mmbm_fluct(const MmbmModel& model, const SolveOptions& opts) {
  if (!model.all_brownian()) {
    throw Error(ErrorCode::FluidPhasePresent,
                "the MMBM fluctuation module needs sigma^2 > 0 in every phase");
  }
  if (!drift_and_pi(model, opts.drift_tol).transient()) {
    throw Error(ErrorCode::NullRecurrent,
                "null-recurrent MMBM; add killing with with_killing and take limits");
  }
  return MmbmFluct{model, compute_fundamentals(model, opts)};
}

Matrix mmbm_scale(const MmbmFluct& fluct, double x) {
  return (expm(-x * fluct.G()) - expm(x * fluct.Lambda())) * fluct.H();
}

Matrix mmbm_scale_derivative(const MmbmFluct& fluct, double x) {
  return (-fluct.G() * expm(-x * fluct.G()) - fluct.Lambda() * expm(x * fluct.Lambda())) *
         fluct.H();
}

Matrix mmbm_exit(const MmbmFluct& fluct, double a, double b) {
  if (a < 0.0 || b < 0.0 || a + b <= 0.0) {
    throw Error(ErrorCode::ZeroArgument, "exit needs a, b >= 0 with a + b > 0");
  }
  const int n = fluct.model.phases();
  if (a == 0.0) return Matrix::Identity(n, n);
  if (b == 0.0) return Matrix::Zero(n, n);
  return mmbm_scale(fluct, b) * lu_inverse(mmbm_scale(fluct, a + b));
}

Matrix mmbm_hitting(const MmbmFluct& fluct, double x) {
  if (x <= 0.0) return expm(-x * fluct.G());
  return expm(x * fluct.Lambda());
}

double mmbm_creeping_identity(const MmbmFluct& fluct, double x) {
  if (x <= 0.0) throw Error(ErrorCode::ZeroArgument, "creeping identity needs x > 0");
  const Matrix lhs = (mmbm_scale_derivative(fluct, x) + mmbm_scale(fluct, x) * fluct.R()) *
                     (0.5 * fluct.model.variance()).asDiagonal();
  return inf_norm(lhs - expm(x * fluct.Lambda()));
}

namespace {

// adaptive Simpson on [a, b] for a matrix-valued integrand
Matrix simpson_recurse(const std::function<Matrix(double)>& f, double a, double b,
                       const Matrix& fa, const Matrix& fm, const Matrix& fb, const Matrix& whole,
                       double tol, int depth) {
  const double m = 0.5 * (a + b);
  const Matrix flm = f(0.5 * (a + m));
  const Matrix frm = f(0.5 * (m + b));
  const Matrix left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Matrix right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || inf_norm(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

Matrix adaptive_simpson(const std::function<Matrix(double)>& f, double a, double b, double tol) {
  const Matrix fa = f(a);
  const Matrix fb = f(b);
  const Matrix fm = f(0.5 * (a + b));
  const Matrix whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 24);
}

}  // namespace

QuadratureCheck mmbm_transform_check(const MmbmFluct& fluct) {
  QuadratureCheck check;
  const double domain_edge = min_real_eigenvalue(fluct.G());
  // any alpha strictly below min Re sp(G) is legal; back off by a unit of the
  // spectral scale so the integrand decays at a healthy rate
  const double gap = std::max(0.5, 0.5 * std::abs(domain_edge));
  check.alpha = domain_edge - gap;
  check.upper_limit = 50.0 / gap;

  auto integrand = [&](double x) -> Matrix {
    return std::exp(check.alpha * x) * mmbm_scale(fluct, x);
  };
  const Matrix integral = adaptive_simpson(integrand, 0.0, check.upper_limit, 1e-8);
  check.residual = inf_norm(integral - lu_inverse(fluct.model.F(check.alpha)));
  return check;
}

}  // namespace mapkit
