#include "mapkit/fluctuation.hpp"

#include <algorithm>
#include <cmath>

#include "mapkit/linalg.hpp"

namespace mapkit {

namespace {

Matrix matrix_power(const Matrix& m, long k) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (long i = 0; i < k; ++i) out = out * m;
  return out;
}

// max Re of the eigenvalues of F(z)/z at real z > 0
double transform_growth(const LatticeModel& model, double z) {
  return max_real_eigenvalue(Matrix(model.F(z) / z));
}

}  // namespace

ExitLaw two_sided_exit(const LatticeModel& model, const TabooTables& tables, const Matrix& r,
                       long a, long b) {
  const int n = model.phases();
  ExitLaw law;
  law.a = a;
  law.b = b;
  if (b == 0) {
    law.D = a == 0 ? Matrix(Matrix::Identity(n, n)) : Matrix(Matrix::Zero(n, n));
    return law;
  }
  if (a + b > tables.horizon) {
    throw Error(ErrorCode::HorizonTooSmall,
                "two-sided exit needs taboo tables up to horizon a+b = " + std::to_string(a + b));
  }
  law.D = tables.xi[static_cast<size_t>(b)] * matrix_power(r, a) *
          lu_inverse(tables.xi[static_cast<size_t>(a + b)]);
  return law;
}

ScaleTable scale_matrices(const LatticeModel& model, int horizon) {
  const int n = model.phases();
  const Matrix& a_minus = model.block(-1);
  if (!is_invertible(a_minus)) {
    throw Error(ErrorCode::SingularAminus1,
                "A_{-1} is singular; use the Xi/R representations instead");
  }
  Eigen::PartialPivLU<Matrix> lu(a_minus);

  ScaleTable table;
  table.horizon = horizon;
  table.w.assign(static_cast<size_t>(horizon) + 1, Matrix::Zero(n, n));
  if (horizon >= 1) table.w[1] = lu.solve(Matrix::Identity(n, n));
  for (int k = 1; k < horizon; ++k) {
    Matrix acc = Matrix::Zero(n, n);
    for (int nu = 1; nu <= k; ++nu) {
      const int jump = k - nu;
      if (jump <= model.max_jump()) acc += model.block(jump) * table.w[static_cast<size_t>(nu)];
    }
    table.w[static_cast<size_t>(k) + 1] = -lu.solve(acc);
  }
  return table;
}

TransformCheck check_scale_transform(const LatticeModel& model, const ScaleTable& table,
                                     const Matrix& g, double z) {
  if (z == 0.0) throw Error(ErrorCode::ZeroArgument, "transform check needs z != 0");
  const double domain = min_abs_eigenvalue(g);
  if (!(std::abs(z) < domain - 1e-6)) {
    throw Error(ErrorCode::ZOutsideDomain,
                "|z| must stay below min |sp(G)| = " + std::to_string(domain));
  }

  TransformCheck check;
  check.z = z;
  check.terms = table.horizon;
  Matrix sum = Matrix::Zero(model.phases(), model.phases());
  double zk = 1.0;
  double recent_term = 0.0;
  for (int k = 1; k <= table.horizon; ++k) {
    zk *= z;
    sum += table.w[static_cast<size_t>(k)] * zk;
    if (k >= table.horizon - 4) recent_term = std::max(recent_term, inf_norm(table.w[static_cast<size_t>(k)]) * std::abs(zk));
  }
  check.residual = inf_norm(sum - z * lu_inverse(model.F(z)));
  const double ratio = std::abs(z) / domain;
  check.tail_bound = 10.0 * recent_term * ratio / (1.0 - ratio);
  return check;
}

namespace {

TransformCheck h_transform_sum(const LatticeModel& model, const Fundamentals& fund, double z) {
  const int n = model.phases();
  TransformCheck check;
  check.z = z;

  const double h_norm = inf_norm(fund.H);
  // P[J_{tau_k}] H is substochastic times H, so the tail is a clean geometric
  // series in |z|.
  int terms = 64;
  const double target = 1e-10 * (1.0 - std::abs(z)) / std::max(h_norm, 1.0);
  if (target < 1.0) {
    terms = std::max(terms, static_cast<int>(std::ceil(std::log(target) / std::log(std::abs(z)))));
  }
  terms = std::min(terms, 20000);
  check.terms = terms;
  check.tail_bound = h_norm * std::pow(std::abs(z), terms + 1) / (1.0 - std::abs(z));

  const std::vector<Matrix> levels = occupation_levels(model, fund, terms);
  Matrix sum = Matrix::Zero(n, n);
  double zk = 1.0;
  for (int k = 1; k <= terms; ++k) {
    zk *= z;
    sum += zk * levels[static_cast<size_t>(k)];  // H(k) = P[J_{tau_k}] H
  }
  sum += z * lu_solve(z * Matrix::Identity(n, n) - fund.G, fund.H);
  check.residual = inf_norm(sum + z * lu_inverse(model.F(z)));
  return check;
}

}  // namespace

TransformCheck check_H_transform_bilateral(const LatticeModel& model, const Fundamentals& fund,
                                           double z) {
  if (z == 0.0) throw Error(ErrorCode::ZeroArgument, "transform check needs z != 0");
  if (!fund.H_finite) throw Error(ErrorCode::NullRecurrent, "H transform needs a transient model");
  if (!(transform_growth(model, z) < 0.0) || !(spectral_radius(fund.G) < std::abs(z))) {
    throw Error(ErrorCode::ZOutsideDomain,
                "eigenvalues of F(z)/z must all have negative real parts at z = " + std::to_string(z));
  }
  return h_transform_sum(model, fund, z);
}

TransformCheck check_H_transform_unilateral(const LatticeModel& model, const Fundamentals& fund,
                                            double z) {
  if (z == 0.0) throw Error(ErrorCode::ZeroArgument, "transform check needs z != 0");
  if (!fund.H_finite) throw Error(ErrorCode::NullRecurrent, "H transform needs a transient model");
  if (!(std::abs(z) < 1.0)) throw Error(ErrorCode::ZOutsideDomain, "|z| must be below 1");
  for (const Complex& ev : eigenvalues(fund.G)) {
    if (std::abs(ev - Complex(z, 0.0)) < 1e-6) {
      throw Error(ErrorCode::ZOutsideDomain, "z collides with an eigenvalue of G");
    }
  }
  return h_transform_sum(model, fund, z);
}

std::optional<double> find_bilateral_z(const LatticeModel& model, const Fundamentals& fund) {
  const double rho = spectral_radius(fund.G);
  const double lo = rho + 1e-9;
  if (lo >= 1.0) return std::nullopt;
  // among grid points where every eigenvalue of F(z)/z has negative real
  // part, prefer the one farthest from sp(G): z near an eigenvalue makes both
  // (zI-G)^{-1} and F(z)^{-1} blow up and the check loses its meaning
  const auto spectrum = eigenvalues(fund.G);
  const int steps = 512;
  double best_z = -1.0;
  double best_gap = 0.0;
  for (int i = 1; i < steps; ++i) {
    const double z = lo + (1.0 - lo) * i / steps;
    if (!(transform_growth(model, z) < 0.0)) continue;
    double gap = 1.0 - z;
    for (const Complex& ev : spectrum) gap = std::min(gap, std::abs(Complex(z, 0.0) - ev));
    if (gap > best_gap) {
      best_gap = gap;
      best_z = z;
    }
  }
  if (best_z < 0.0 || best_gap < 0.02) return std::nullopt;
  return best_z;
}

Matrix creeping(const TabooTables& tables, long m) {
  if (m > tables.horizon) throw Error(ErrorCode::HorizonTooSmall, "creeping needs Phi up to m");
  return tables.phi[static_cast<size_t>(m)] * lu_inverse(tables.phi[0]);
}

Matrix creeping_scale_form(const ScaleTable& table, const Matrix& r, long m) {
  return (table(m + 1) - table(m) * lu_inverse(r)) * lu_inverse(table(1));
}

Matrix hit_before_upcross(const TabooTables& tables, const Matrix& r, long m, long l) {
  if (m + l > tables.horizon + 1 || l > tables.horizon) {
    throw Error(ErrorCode::HorizonTooSmall, "hit_before_upcross needs Phi up to m+l-1");
  }
  const int n = static_cast<int>(r.rows());
  Matrix numerator = Matrix::Zero(n, n);
  Matrix r_pow = Matrix::Identity(n, n);
  for (long i = 0; i < l; ++i) {
    numerator += tables.phi[static_cast<size_t>(m + i)] * r_pow;
    r_pow = r_pow * r;
  }
  return numerator * lu_inverse(tables.xi[static_cast<size_t>(l)]);
}

Matrix hit_before_upcross_scale_form(const ScaleTable& table, const Matrix& r, long m, long l) {
  const Matrix r_inv_l = matrix_power(lu_inverse(r), l);
  return (table(m + l) - table(m) * r_inv_l) * lu_inverse(table(l));
}

Matrix strip_occupation_transient(const LatticeModel& model, const Fundamentals& fund,
                                  const TabooTables& tables, long k, long l, long m) {
  if (!fund.H_finite) throw Error(ErrorCode::NullRecurrent, "occupation route needs transient model");
  auto up_to = [&](long level, long bound) -> Matrix {
    // E[L(level, tau_bound^up)] = H(level) - H(bound) R^{bound-level}
    return occupation_at_level(model, fund, level) -
           occupation_at_level(model, fund, bound) * matrix_power(fund.R, bound - level);
  };
  const Matrix d = two_sided_exit(model, tables, fund.R, l, m).D;
  return up_to(k, m) - d * up_to(k + l, m + l);
}

Matrix strip_occupation_scale(const ScaleTable& table, long k, long l, long m) {
  return table(m) * lu_inverse(table(m + l)) * table(k + l) - table(k);
}

Matrix strip_occupation(const LatticeModel& model, const Fundamentals& fund,
                        const TabooTables& tables, long k, long l, long m) {
  if (!(-l < k && k < m) || l < 1 || m < 1) {
    throw Error(ErrorCode::NoValidRoute, "strip occupation needs -l < k < m with l, m >= 1");
  }
  if (fund.H_finite) return strip_occupation_transient(model, fund, tables, k, l, m);
  if (is_invertible(model.block(-1))) {
    return strip_occupation_scale(scale_matrices(model, static_cast<int>(m + l)), k, l, m);
  }
  throw Error(ErrorCode::NoValidRoute,
              "strip occupation needs a transient model or a nonsingular A_{-1}");
}

Matrix exit_overshoot(const LatticeModel& model, const Fundamentals& fund,
                      const TabooTables& tables, long l, long m, long u) {
  const int n = model.phases();
  Matrix out = Matrix::Zero(n, n);
  for (long nu = 1; nu <= m + l - 1; ++nu) {
    if (nu + u > model.max_jump()) continue;
    out += strip_occupation(model, fund, tables, m - nu, l, m) *
           model.block(static_cast<int>(nu + u));
  }
  return out;
}

Matrix d_ab_scale_form(const ScaleTable& table, long a, long b) {
  const auto n = table.w[0].rows();
  if (b == 0) return a == 0 ? Matrix(Matrix::Identity(n, n)) : Matrix(Matrix::Zero(n, n));
  return table(b) * lu_inverse(table(a + b));
}

Matrix d_ab_theta_form(const TabooTables& tables, const Matrix& g, long a, long b) {
  const auto n = g.rows();
  if (b == 0) return a == 0 ? Matrix(Matrix::Identity(n, n)) : Matrix(Matrix::Zero(n, n));
  if (!tables.theta_available || a + b > tables.horizon) {
    throw Error(ErrorCode::HorizonTooSmall, "Theta form needs theta tables up to a+b");
  }
  const Matrix g_inv = lu_inverse(g);
  const Matrix num = matrix_power(g_inv, b) * tables.theta[static_cast<size_t>(b)];
  const Matrix den = matrix_power(g_inv, a + b) * tables.theta[static_cast<size_t>(a + b)];
  return num * lu_inverse(den);
}

DecayDiagnostic decay_diagnostic(const LatticeModel& model, const Fundamentals& fund, int k_max) {
  if (fund.regime.tag != RegimeTag::C1NegativeDrift) {
    throw Error(ErrorCode::WrongRegime, "decay diagnostic applies to non-defective drift < 0");
  }
  if (k_max < 5) throw Error(ErrorCode::HorizonTooSmall, "decay diagnostic needs K >= 5");

  DecayDiagnostic diag;
  const std::vector<Matrix> levels = occupation_levels(model, fund, k_max);
  const Matrix h_inv = lu_inverse(fund.H);
  diag.xi_k.reserve(static_cast<size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) {
    diag.xi_k.push_back(spectral_radius(levels[static_cast<size_t>(k)] * h_inv));
  }
  diag.xi_star_estimate = std::pow(diag.xi_k.back(), 1.0 / k_max);

  // scan real z > 1 for the region where all eigenvalues of F(z)/z have
  // negative real parts; phi is the supremum of that region
  const double z_cap = 1e3;
  double last_valid = -1.0;
  double first_invalid_after = -1.0;
  double z = 1.0 + 1e-6;
  while (z < z_cap) {
    if (transform_growth(model, z) < 0.0) {
      last_valid = z;
    } else if (last_valid > 0.0) {
      first_invalid_after = z;
      break;
    }
    z *= 1.002;
  }
  if (last_valid > 0.0) {
    diag.region_found = true;
    double hi = first_invalid_after > 0.0 ? first_invalid_after : z_cap;
    double lo = last_valid;
    for (int iter = 0; iter < 80 && hi - lo > 1e-10; ++iter) {
      const double mid = 0.5 * (lo + hi);
      (transform_growth(model, mid) < 0.0 ? lo : hi) = mid;
    }
    diag.phi_estimate = 0.5 * (lo + hi);
    diag.product = diag.xi_star_estimate * diag.phi_estimate;
    diag.product_within_5pct = std::abs(diag.product - 1.0) < 0.05;
  } else {
    diag.phi_estimate = std::numeric_limits<double>::quiet_NaN();
    diag.product = std::numeric_limits<double>::quiet_NaN();
  }
  return diag;
}

}  // namespace mapkit
