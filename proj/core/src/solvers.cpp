#include "mapkit/solvers.hpp"

#include <cmath>

#include "mapkit/linalg.hpp"
#include "mapkit/taboo.hpp"

namespace mapkit {

namespace {

// sum_m blocks[m] X^{m+1} evaluated by Horner, blocks indexed from A_{-1}.
Matrix horner_right(const std::vector<Matrix>& blocks, const Matrix& x) {
  Matrix p = blocks.back();
  for (size_t idx = blocks.size() - 1; idx-- > 0;) p = blocks[idx] + p * x;
  return p;
}

// sum_m X^{m+1} blocks[m]
Matrix horner_left(const std::vector<Matrix>& blocks, const Matrix& x) {
  Matrix p = blocks.back();
  for (size_t idx = blocks.size() - 1; idx-- > 0;) p = blocks[idx] + x * p;
  return p;
}

}  // namespace

Matrix solve_G_lattice(const LatticeModel& model, const SolveOptions& opts) {
  const int n = model.phases();
  std::vector<Matrix> jump;  // A~_{-1} .. A~_M
  jump.reserve(model.blocks().size());
  for (int m = -1; m <= model.max_jump(); ++m) jump.push_back(model.jump_block(m));

  const Vector& exit_rates = model.exit_rates();
  Matrix g = Matrix::Zero(n, n);
  double residual = std::numeric_limits<double>::infinity();
  for (long iter = 0; iter < opts.max_iter; ++iter) {
    Matrix next = horner_right(jump, g);
    // residual of the rate equation: sum_m A_m G^{m+1} = diag(-A_0) (T(G) - G)
    residual = inf_norm(exit_rates.asDiagonal() * (next - g));
    if (residual < opts.tol) return g;
    g = std::move(next);
  }
  throw SolveError(ErrorCode::MaxIterExceeded,
                   "G iteration did not reach the residual tolerance", g, residual,
                   opts.max_iter);
}

Matrix solve_R_lattice(const LatticeModel& model, const Matrix& g_of_reverse, const Vector& pi,
                       const SolveOptions& opts) {
  Matrix r = pi.cwiseInverse().asDiagonal() * g_of_reverse.transpose() * pi.asDiagonal();
  const double residual = inf_norm(horner_left(model.blocks(), r));
  if (residual >= 10.0 * opts.tol) {
    throw SolveError(ErrorCode::ResidualTooLarge,
                     "duality transport of G_hat left residual " + std::to_string(residual), r,
                     residual, 0);
  }
  return r;
}

Matrix solve_H_lattice(const LatticeModel& model, const Matrix& g,
                       const std::vector<Matrix>& overshoot, const Regime& regime) {
  if (!regime.transient()) {
    throw Error(ErrorCode::NullRecurrent, "H is infinite for null-recurrent models");
  }
  const int n = model.phases();
  Matrix u = overshoot.back();
  for (size_t i = overshoot.size() - 1; i-- > 0;) u = overshoot[i] + u * g;
  if (spectral_radius(u) >= 1.0) {
    throw Error(ErrorCode::SingularSolve, "return matrix U has spectral radius >= 1");
  }
  const Matrix rhs = Matrix(model.exit_rates().cwiseInverse().asDiagonal());
  return lu_solve(Matrix::Identity(n, n) - u, rhs);
}

std::vector<Matrix> occupation_levels(const LatticeModel& model, const Fundamentals& fund,
                                      long kmax) {
  if (!fund.H_finite) {
    throw Error(ErrorCode::NullRecurrent, "occupation times are infinite for null-recurrent models");
  }
  const int n = model.phases();
  const int max_jump = model.max_jump();

  std::vector<Matrix> g_pow(static_cast<size_t>(max_jump) + 1);
  g_pow[0] = Matrix::Identity(n, n);
  for (int i = 1; i <= max_jump; ++i) g_pow[static_cast<size_t>(i)] = g_pow[static_cast<size_t>(i - 1)] * fund.G;

  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - fund.overshoot[0]);
  std::vector<Matrix> levels(static_cast<size_t>(kmax) + 1);
  levels[0] = fund.H;
  for (long m = 1; m <= kmax; ++m) {
    Matrix rhs = Matrix::Zero(n, n);
    for (int nu = 1; nu <= max_jump; ++nu) {
      if (nu <= m) {
        rhs += fund.overshoot[static_cast<size_t>(nu)] * levels[static_cast<size_t>(m - nu)];
      } else {
        rhs += fund.overshoot[static_cast<size_t>(nu)] * g_pow[static_cast<size_t>(nu - m)] * fund.H;
      }
    }
    levels[static_cast<size_t>(m)] = lu.solve(rhs);
  }
  return levels;
}

Matrix occupation_at_level(const LatticeModel& model, const Fundamentals& fund, long k) {
  if (!fund.H_finite) {
    throw Error(ErrorCode::NullRecurrent, "occupation times are infinite for null-recurrent models");
  }
  if (k <= 0) {
    Matrix out = fund.H;
    for (long i = 0; i < -k; ++i) out = fund.G * out;
    return out;
  }
  return occupation_levels(model, fund, k).back();
}

Matrix hitting_matrix(const LatticeModel& model, const Fundamentals& fund, long k) {
  const int n = model.phases();
  if (k == 0) return Matrix::Identity(n, n);
  if (k < 0) {
    Matrix out = Matrix::Identity(n, n);
    for (long i = 0; i < -k; ++i) out = out * fund.G;
    return out;
  }
  if (!fund.H_finite) {
    throw Error(ErrorCode::NullRecurrent,
                "hitting of positive levels needs a transient model; add killing and take limits");
  }
  return occupation_at_level(model, fund, k) * lu_inverse(fund.H);
}

Fundamentals compute_fundamentals(const LatticeModel& model, const SolveOptions& opts) {
  Fundamentals fund;
  fund.regime = drift_and_pi(model, opts.drift_tol);
  fund.G = solve_G_lattice(model, opts);
  fund.residuals["G"] = inf_norm(horner_right(model.blocks(), fund.G));

  const Matrix g_hat = solve_G_lattice(reverse(model), opts);
  fund.R = solve_R_lattice(model, g_hat, fund.regime.pi, opts);
  fund.residuals["R"] = inf_norm(horner_left(model.blocks(), fund.R));

  fund.R_tilde = r_tilde(model, fund.R);
  fund.residuals["R_tilde"] = r_tilde_residual(model, fund.R_tilde);
  fund.overshoot = overshoot_matrices(model, fund.R_tilde);

  if (fund.regime.transient()) {
    fund.H = solve_H_lattice(model, fund.G, fund.overshoot, fund.regime);
    fund.H_finite = true;
    fund.residuals["GH_HR"] = inf_norm(fund.G * fund.H - fund.H * fund.R);
  }
  return fund;
}

// --- MMBM ------------------------------------------------------------------

namespace {

double mmbm_residual(const MmbmModel& model, const Matrix& g) {
  return inf_norm(0.5 * model.variance().asDiagonal() * g * g +
                  model.drift().asDiagonal() * g + model.generator());
}

}  // namespace

namespace {

// Class test for the solution: in C1 the right solution is a conservative
// generator; in C2 at least one row sum is strictly negative and every
// eigenvalue has nonpositive real part. Wrong-branch solutions are O(1) away,
// so the slack only needs to absorb the iteration error, which scales like
// sqrt(residual) in the zero-drift case. The strict C2 row-sum test only
// applies when the defect or drift is decisive; near the C1 boundary it would
// flag legitimate solutions whose mass loss is of the same order as the
// killing itself.
bool mmbm_class_ok(const Matrix& g, bool c1, bool decisive_c2, double scale, double residual) {
  const double slack = std::max(1e-7 * scale, 20.0 * std::sqrt(residual * scale));
  if (max_real_eigenvalue(g) > slack) return false;
  const double min_row = g.rowwise().sum().minCoeff();
  const double max_row = g.rowwise().sum().maxCoeff();
  if (c1) return std::abs(min_row) < slack && std::abs(max_row) < slack;
  if (decisive_c2) return min_row < -1e-8 * scale;
  return min_row < slack;
}

}  // namespace

Matrix solve_G_mmbm(const MmbmModel& model, const SolveOptions& opts) {
  // Uniformization: substituting G = theta (B - I) turns the quadratic into
  // the QBD equation C0 + C1 B + C2 B^2 = 0 with nonnegative off-diagonal
  // blocks, so B is the minimal nonnegative solution reached monotonically
  // from 0, exactly as in the lattice case. The residuals agree identically:
  // C0 + C1 B + C2 B^2 = 1/2 diag(sigma^2) G^2 + diag(a) G + Q.
  const int n = model.phases();
  const Matrix q = model.generator();
  const Vector& a = model.drift();
  const Vector& s2 = model.variance();

  double theta_min = 0.0;
  for (int i = 0; i < n; ++i) {
    if (s2(i) > 0.0) {
      // positive root of 1/2 theta^2 s2 - theta a + Q_ii = 0
      theta_min = std::max(theta_min,
                           (a(i) + std::sqrt(a(i) * a(i) - 2.0 * s2(i) * q(i, i))) / s2(i));
    } else {
      theta_min = std::max(theta_min, -q(i, i) / -a(i));
    }
  }
  const double theta = 2.0 * theta_min + 1.0;

  const Matrix c2 = 0.5 * theta * theta * Matrix(s2.asDiagonal());
  const Vector c1_diag = theta * (a.array() - theta * s2.array()).matrix();
  Matrix c0 = c2 - theta * Matrix(a.asDiagonal()) + q;
  const Vector exit = -c1_diag;  // all positive by the choice of theta

  // jump-chain blocks: the middle one vanishes because C1 is diagonal
  const Matrix b_down = exit.cwiseInverse().asDiagonal() * c0;
  const Matrix b_up = exit.cwiseInverse().asDiagonal() * c2;

  Matrix b = Matrix::Zero(n, n);
  double residual = std::numeric_limits<double>::infinity();
  for (long iter = 0; iter < opts.max_iter; ++iter) {
    Matrix next = b_down + b_up * b * b;
    residual = inf_norm(exit.asDiagonal() * (next - b));
    if (residual < opts.tol) {
      const Matrix g = theta * (b - Matrix::Identity(n, n));
      const double scale = std::max({1.0, max_abs(q), a.cwiseAbs().maxCoeff(), s2.maxCoeff()});
      const Regime regime = drift_and_pi(model, opts.drift_tol);
      const bool c1_regime = !model.defective() && regime.mu <= opts.drift_tol;
      const bool decisive_c2 = model.kill_rates().maxCoeff() > 1e-6 * scale ||
                               regime.mu > 1e-6 * scale;
      if (!mmbm_class_ok(g, c1_regime, decisive_c2, scale, residual)) {
        throw SolveError(ErrorCode::MaxIterExceeded,
                         "minimal solution left the expected class", g, residual, iter);
      }
      return g;
    }
    b = std::move(next);
  }
  throw SolveError(ErrorCode::MaxIterExceeded,
                   "MMBM G iteration did not reach the residual tolerance",
                   theta * (b - Matrix::Identity(n, n)), residual, opts.max_iter);
}

Matrix solve_Lambda_mmbm(const MmbmModel& model, const SolveOptions& opts) {
  return solve_G_mmbm(model.negated(), opts);
}

Matrix solve_R_mmbm(const MmbmModel& model, const Matrix& g_of_reverse, const Vector& pi,
                    const SolveOptions& opts) {
  Matrix r = pi.cwiseInverse().asDiagonal() * g_of_reverse.transpose() * pi.asDiagonal();
  const double residual = inf_norm(0.5 * r * r * model.variance().asDiagonal() +
                                   r * model.drift().asDiagonal() + model.generator());
  if (residual >= 10.0 * opts.tol) {
    throw SolveError(ErrorCode::ResidualTooLarge,
                     "duality transport of G_hat left residual " + std::to_string(residual), r,
                     residual, 0);
  }
  return r;
}

Matrix solve_H_mmbm(const MmbmModel& model, const Matrix& g, const Matrix& lambda,
                    const Regime& regime, double* alpha_independence) {
  if (!regime.transient()) {
    throw Error(ErrorCode::NullRecurrent, "H is infinite for null-recurrent models");
  }
  if (lambda.rows() != model.phases() || lambda.cols() != model.phases()) {
    throw Error(ErrorCode::FluidPhasePresent,
                "the H transform needs the upward-passage generator, unavailable with fluid phases");
  }
  const int n = model.phases();
  const Matrix id = Matrix::Identity(n, n);
  const double lo = max_real_eigenvalue(g);        // alpha must exceed this
  const double hi = -max_real_eigenvalue(lambda);  // and stay below this
  const double margin = 1e-6;

  // 32 log-spaced magnitudes, tried with both signs; among the valid points,
  // prefer those farthest from sp(G) and -sp(Lambda), where the resolvents
  // are best conditioned
  const auto g_spectrum = eigenvalues(g);
  const auto lambda_spectrum = eigenvalues(lambda);
  std::vector<std::pair<double, double>> candidates;  // (conditioning score, alpha)
  for (int j = 0; j < 32; ++j) {
    const double mag = std::pow(10.0, -3.0 + 6.0 * j / 31.0);
    for (double alpha : {mag, -mag}) {
      if (!(alpha > lo + margin && alpha < hi - margin)) continue;
      double score = std::numeric_limits<double>::infinity();
      for (const Complex& ev : g_spectrum) score = std::min(score, std::abs(alpha - ev));
      for (const Complex& ev : lambda_spectrum) score = std::min(score, std::abs(alpha + ev));
      candidates.emplace_back(score, alpha);
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  Matrix h_first, h_second;
  int found = 0;
  for (const auto& [score, alpha] : candidates) {
    const Matrix f = model.F(alpha);
    if (!is_invertible(f)) continue;
    const Matrix res_g = alpha * id - g;
    const Matrix res_l = alpha * id + lambda;
    if (!is_invertible(res_g) || !is_invertible(res_l)) continue;
    const Matrix diff = lu_inverse(res_g) - lu_inverse(res_l);
    if (!is_invertible(diff)) continue;
    Matrix h = -lu_solve(diff, lu_inverse(f));
    if (found == 0) {
      h_first = std::move(h);
      ++found;
    } else {
      h_second = std::move(h);
      ++found;
      break;
    }
  }
  if (found < 2) {
    throw Error(ErrorCode::NoValidAlpha,
                "no two valid transform points alpha in (max Re sp G, -max Re sp Lambda)");
  }
  const double indep = inf_norm(h_first - h_second) / std::max(1.0, inf_norm(h_first));
  if (alpha_independence != nullptr) *alpha_independence = indep;
  if (indep > 1e-8) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", indep);
    throw Error(ErrorCode::NoValidAlpha, std::string("H differs across transform points: ") + buf);
  }
  return h_first;
}

Fundamentals compute_fundamentals(const MmbmModel& model, const SolveOptions& opts) {
  Fundamentals fund;
  fund.regime = drift_and_pi(model, opts.drift_tol);
  fund.G = solve_G_mmbm(model, opts);
  fund.residuals["G"] = mmbm_residual(model, fund.G);

  const Matrix g_hat = solve_G_mmbm(reverse(model), opts);
  fund.R = solve_R_mmbm(model, g_hat, fund.regime.pi, opts);
  fund.residuals["R"] = inf_norm(0.5 * fund.R * fund.R * model.variance().asDiagonal() +
                                 fund.R * model.drift().asDiagonal() + model.generator());

  // Lambda needs the negated model to be free of subordinator phases; fluid
  // phases of X turn into upward drifts of -X, in which case Lambda (and the
  // H route through it) stays unavailable.
  if (model.all_brownian()) {
    fund.Lambda = solve_Lambda_mmbm(model, opts);
    fund.residuals["Lambda"] = mmbm_residual(model.negated(), fund.Lambda);

    if (fund.regime.transient()) {
      double indep = 0.0;
      fund.H = solve_H_mmbm(model, fund.G, fund.Lambda, fund.regime, &indep);
      fund.H_finite = true;
      fund.residuals["H_alpha_independence"] = indep;
      fund.residuals["GH_HR"] = inf_norm(fund.G * fund.H - fund.H * fund.R);
    }
  }
  return fund;
}

}  // namespace mapkit
