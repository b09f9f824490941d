#include "mapkit/taboo.hpp"

#include <Eigen/LU>

#include "mapkit/linalg.hpp"

namespace mapkit {

Matrix r_tilde(const LatticeModel& model, const Matrix& r) {
  const Vector& d = model.exit_rates();
  return d.cwiseInverse().asDiagonal() * r * d.asDiagonal();
}

double r_tilde_residual(const LatticeModel& model, const Matrix& rt) {
  // A~_{-1} + R~ A~_0 + R~^2 A~_1 + ... - R~
  Matrix acc = model.jump_block(model.max_jump());
  for (int m = model.max_jump() - 1; m >= -1; --m) acc = model.jump_block(m) + rt * acc;
  return inf_norm(acc - rt);
}

std::vector<Matrix> overshoot_matrices(const LatticeModel& model, const Matrix& rt) {
  const int max_jump = model.max_jump();
  std::vector<Matrix> up(static_cast<size_t>(max_jump) + 1);
  up[static_cast<size_t>(max_jump)] = model.jump_block(max_jump);
  for (int i = max_jump - 1; i >= 0; --i) {
    up[static_cast<size_t>(i)] = model.jump_block(i) + rt * up[static_cast<size_t>(i + 1)];
  }
  if (!is_invertible(Matrix::Identity(model.phases(), model.phases()) - up[0])) {
    throw Error(ErrorCode::SingularPivot, "I - A_0^up is singular");
  }
  return up;
}

std::vector<Matrix> phi_matrices(const LatticeModel& model, const std::vector<Matrix>& overshoot,
                                 int horizon) {
  const int n = model.phases();
  const int max_jump = model.max_jump();
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - overshoot[0]);

  std::vector<Matrix> phi(static_cast<size_t>(horizon) + 1);
  phi[0] = lu.solve(Matrix(model.exit_rates().cwiseInverse().asDiagonal()));
  for (int m = 1; m <= horizon; ++m) {
    Matrix rhs = Matrix::Zero(n, n);
    for (int nu = 1; nu <= std::min(m, max_jump); ++nu) {
      rhs += overshoot[static_cast<size_t>(nu)] * phi[static_cast<size_t>(m - nu)];
    }
    phi[static_cast<size_t>(m)] = lu.solve(rhs);
  }
  return phi;
}

std::vector<Matrix> xi_matrices(const std::vector<Matrix>& phi, const Matrix& r, int horizon) {
  const auto n = phi[0].rows();
  std::vector<Matrix> xi(static_cast<size_t>(horizon) + 1);
  xi[0] = Matrix::Zero(n, n);
  Matrix r_pow = Matrix::Identity(n, n);
  for (int m = 1; m <= horizon; ++m) {
    // Xi(m) = Xi(m-1) + Phi(m-1) R^{m-1}, exactly as the telescoping states
    xi[static_cast<size_t>(m)] = xi[static_cast<size_t>(m - 1)] + phi[static_cast<size_t>(m - 1)] * r_pow;
    r_pow = r_pow * r;
  }
  return xi;
}

std::vector<Matrix> theta_matrices(const LatticeModel& model, const Fundamentals& fund,
                                   const std::vector<Matrix>& xi, int horizon,
                                   std::string* route) {
  const int n = model.phases();
  std::vector<Matrix> theta(static_cast<size_t>(horizon) + 1, Matrix::Zero(n, n));

  if (fund.H_finite) {
    if (route != nullptr) *route = "occupation";
    // Theta(k) = H - G^k P[J_{tau_k}] H, and P[J_{tau_k}] H is H(k)
    const std::vector<Matrix> levels = occupation_levels(model, fund, horizon);
    Matrix g_pow = Matrix::Identity(n, n);
    for (int k = 1; k <= horizon; ++k) {
      g_pow = g_pow * fund.G;
      theta[static_cast<size_t>(k)] = fund.H - g_pow * levels[static_cast<size_t>(k)];
    }
    return theta;
  }
  if (is_invertible(model.block(-1))) {
    if (route != nullptr) *route = "scale";
    const Matrix r_inv = lu_inverse(fund.R);
    Matrix g_pow = Matrix::Identity(n, n);
    Matrix r_inv_pow = Matrix::Identity(n, n);
    for (int k = 1; k <= horizon; ++k) {
      g_pow = g_pow * fund.G;
      r_inv_pow = r_inv_pow * r_inv;
      theta[static_cast<size_t>(k)] = g_pow * xi[static_cast<size_t>(k)] * r_inv_pow;
    }
    return theta;
  }
  throw Error(ErrorCode::NullRecurrentAndSingularA,
              "Theta needs a transient model or a nonsingular A_{-1}");
}

TabooTables build_taboo_tables(const LatticeModel& model, const Fundamentals& fund, int horizon) {
  TabooTables tables;
  tables.horizon = horizon;
  tables.r_tilde = fund.R_tilde.size() > 0 ? fund.R_tilde : r_tilde(model, fund.R);
  tables.overshoot =
      fund.overshoot.empty() ? overshoot_matrices(model, tables.r_tilde) : fund.overshoot;
  tables.phi = phi_matrices(model, tables.overshoot, horizon);
  tables.xi = xi_matrices(tables.phi, fund.R, horizon);
  try {
    tables.theta = theta_matrices(model, fund, tables.xi, horizon, &tables.theta_route);
    tables.theta_available = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NullRecurrentAndSingularA) throw;
    tables.theta_available = false;
  }
  return tables;
}

}  // namespace mapkit
