#include "mapkit/extrema.hpp"

#include <Eigen/LU>
#include <cmath>

#include "mapkit/linalg.hpp"

namespace mapkit {

namespace {

void require_defective(const LatticeModel& model) {
  if (!model.defective()) {
    throw Error(ErrorCode::NotDefective, "extrema at killing need killing rates q != 0");
  }
}

// Continue the Phi recursion past the horizon the tables were built with.
void extend_phi(const LatticeModel& model, const std::vector<Matrix>& overshoot,
                std::vector<Matrix>& phi, size_t horizon) {
  const int n = model.phases();
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - overshoot[0]);
  while (phi.size() <= horizon) {
    const size_t m = phi.size();
    Matrix rhs = Matrix::Zero(n, n);
    for (size_t nu = 1; nu < overshoot.size() && nu <= m; ++nu) {
      rhs += overshoot[nu] * phi[m - nu];
    }
    phi.push_back(lu.solve(rhs));
  }
}

double capped_ratio(double current, double previous) {
  if (previous <= 0.0) return 0.0;
  return std::min(current / previous, 0.98);
}

}  // namespace

Matrix max_at_killing(const LatticeModel& model, const Fundamentals& fund,
                      const TabooTables& tables, long m, long l) {
  require_defective(model);
  if (m > tables.horizon) throw Error(ErrorCode::HorizonTooSmall, "max_at_killing needs Phi up to m");
  Matrix r_pow_l = Matrix::Identity(model.phases(), model.phases());
  for (long i = 0; i < l; ++i) r_pow_l = r_pow_l * fund.R;
  return tables.phi[static_cast<size_t>(m)] * r_pow_l * model.kill_rates().asDiagonal();
}

Matrix min_at_killing(const LatticeModel& model, const Fundamentals& fund, long m, long l) {
  require_defective(model);
  // defective implies transient, so the occupation route always applies
  const Matrix occupancy = occupation_at_level(model, fund, l) -
                           fund.G * occupation_at_level(model, fund, l + 1);
  Matrix g_pow = Matrix::Identity(model.phases(), model.phases());
  for (long i = 0; i < m; ++i) g_pow = g_pow * fund.G;
  return g_pow * occupancy * model.kill_rates().asDiagonal();
}

Matrix max_at_killing_scale_form(const LatticeModel& model, const ScaleTable& table,
                                 const Matrix& r, long m, long l) {
  require_defective(model);
  Matrix r_pow_l = Matrix::Identity(model.phases(), model.phases());
  for (long i = 0; i < l; ++i) r_pow_l = r_pow_l * r;
  return (table(m + 1) * r - table(m)) * r_pow_l * model.kill_rates().asDiagonal();
}

Matrix min_at_killing_scale_form(const LatticeModel& model, const Fundamentals& fund,
                                 const ScaleTable& table, long m, long l) {
  require_defective(model);
  Matrix g_pow = Matrix::Identity(model.phases(), model.phases());
  for (long i = 0; i < m; ++i) g_pow = g_pow * fund.G;
  return g_pow * (fund.G * table(l + 1) - table(l)) * model.kill_rates().asDiagonal();
}

ExtremaLaw extrema_law(const LatticeModel& model, const Fundamentals& fund,
                       const TabooTables& tables, bool is_max, double tail_target,
                       long max_horizon) {
  require_defective(model);
  const int n = model.phases();
  const Vector q = model.kill_rates();
  const Matrix q_diag = q.asDiagonal();

  ExtremaLaw law;
  law.is_max = is_max;
  law.captured_mass = Vector::Zero(n);
  law.tail_bound = Vector::Zero(n);

  // One direction of the grid always has an exact geometric remainder (a
  // matrix power against a convergent resolvent); the other direction gets a
  // measured-ratio geometric bound. outer_term(j) must return the matrix T_j
  // with cell(j, inner) = T_j * inner_pow^inner * diag(q).
  const Matrix inner = is_max ? fund.R : fund.G;
  const Matrix resolvent = lu_inverse(Matrix::Identity(n, n) - inner);

  std::vector<Matrix> phi = tables.phi;
  std::vector<Matrix> levels;
  if (!is_max) levels = occupation_levels(model, fund, 8);
  auto outer_term = [&](long j) -> Matrix {
    if (is_max) {
      extend_phi(model, tables.overshoot, phi, static_cast<size_t>(j));
      return phi[static_cast<size_t>(j)];
    }
    if (static_cast<size_t>(j + 1) >= levels.size()) {
      levels = occupation_levels(model, fund, 2 * j + 2);
    }
    return levels[static_cast<size_t>(j)] - fund.G * levels[static_cast<size_t>(j + 1)];
  };

  double prev_mass = -1.0;
  double ratio = 0.0;
  bool outer_tail_added = false;
  double outer_tail = 0.0;
  for (long j = 0; j <= max_horizon; ++j) {
    const Matrix term = outer_term(j);
    const Vector outer_mass_vec =
        is_max ? Vector(term * resolvent * q) : Vector(resolvent * term * q);

    Matrix inner_pow = Matrix::Identity(n, n);
    bool inner_tail_added = false;
    Vector remainder = Vector::Zero(n);
    for (long i = 0; i <= max_horizon; ++i) {
      ExtremaCell cell;
      cell.m = is_max ? j : i;
      cell.l = is_max ? i : j;
      if (is_max) {
        cell.prob = term * inner_pow * q_diag;
      } else {
        cell.prob = inner_pow * term * q_diag;
      }
      law.captured_mass += cell.prob.rowwise().sum();
      law.cells.push_back(std::move(cell));
      inner_pow = inner_pow * inner;
      remainder = is_max ? Vector(term * inner_pow * resolvent * q)
                         : Vector(inner_pow * resolvent * term * q);
      if (remainder.maxCoeff() < 0.125 * tail_target) {
        law.tail_bound += remainder;  // exact remaining inner-direction mass
        inner_tail_added = true;
        break;
      }
    }
    if (!inner_tail_added) law.tail_bound += remainder;

    const double mass = outer_mass_vec.maxCoeff();
    if (prev_mass >= 0.0) ratio = std::max(ratio * 0.5, capped_ratio(mass, prev_mass));
    prev_mass = mass;
    if (mass == 0.0 && j >= 4) {
      outer_tail_added = true;
      break;
    }
    if (mass > 0.0 && ratio > 0.0) {
      outer_tail = 4.0 * mass * ratio / (1.0 - ratio);
      if (outer_tail < tail_target && j >= 4) {
        law.tail_bound.array() += outer_tail;
        outer_tail_added = true;
        break;
      }
    }
  }
  if (!outer_tail_added) law.tail_bound.array() += outer_tail;
  return law;
}

}  // namespace mapkit
