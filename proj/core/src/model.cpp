#include "mapkit/model.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

#include "mapkit/linalg.hpp"

namespace mapkit {

const char* to_string(RegimeTag tag) {
  switch (tag) {
    case RegimeTag::C1ZeroDrift: return "C1_zero_drift";
    case RegimeTag::C1NegativeDrift: return "C1_negative_drift";
    case RegimeTag::C2Defective: return "C2_defective";
    case RegimeTag::C2PositiveDrift: return "C2_positive_drift";
  }
  return "unknown";
}

namespace {

bool finite(const Matrix& m) { return m.allFinite(); }

// Adjacency of the phase graph of a generator (positive off-diagonal rates).
std::vector<std::vector<int>> generator_graph(const Matrix& q, double eps) {
  const int n = static_cast<int>(q.rows());
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && q(i, j) > eps) adj[static_cast<size_t>(i)].push_back(j);
    }
  }
  return adj;
}

// Irreducibility of the bivariate chain in the sense that rules out the
// classical pathologies: the level component must actually move, and phases
// observed at a common level must communicate. Both are decided on the
// level-augmented graph over the window {-(M+1), ..., M+1}, which by
// translation invariance is wide enough for any single jump plus the unit
// down-steps needed to come back. Monotone chains (pure birth or pure death)
// are legitimate models and pass.
bool bivariate_irreducible(const std::vector<Matrix>& blocks, int n, double eps) {
  const int max_jump = static_cast<int>(blocks.size()) - 2;

  bool level_moves = false;
  for (int m = -1; m <= max_jump; ++m) {
    if (m != 0 && max_abs(blocks[static_cast<size_t>(m + 1)]) > eps) level_moves = true;
  }
  if (!level_moves) return false;

  const int half = max_jump + 1;
  const int levels = 2 * half + 1;
  auto id = [&](int level, int phase) { return (level + half) * n + phase; };

  std::vector<std::vector<int>> adj(static_cast<size_t>(levels * n));
  for (int level = -half; level <= half; ++level) {
    for (int m = -1; m <= max_jump; ++m) {
      const int target = level + m;
      if (target < -half || target > half) continue;
      const Matrix& block = blocks[static_cast<size_t>(m + 1)];
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (m == 0 && i == j) continue;
          if (block(i, j) > eps) adj[static_cast<size_t>(id(level, i))].push_back(id(target, j));
        }
      }
    }
  }

  // every phase pair must communicate at level 0 within the window
  for (int i = 0; i < n; ++i) {
    std::vector<char> seen(adj.size(), 0);
    std::vector<int> stack = {id(0, i)};
    seen[static_cast<size_t>(id(0, i))] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adj[static_cast<size_t>(u)]) {
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (!seen[static_cast<size_t>(id(0, j))]) return false;
    }
  }
  return true;
}

Vector stationary_distribution(const Matrix& conservative) {
  const int n = static_cast<int>(conservative.rows());
  // pi Q = 0, pi 1 = 1: transpose, overwrite one equation with normalization
  Matrix a = conservative.transpose();
  a.row(0).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(0) = 1.0;

  Eigen::PartialPivLU<Matrix> lu(a);
  Vector d = lu.matrixLU().diagonal().cwiseAbs();
  if (!(d.maxCoeff() > 0.0) || d.minCoeff() <= kPivotTol * d.maxCoeff()) {
    throw Error(ErrorCode::SingularSolve, "stationary distribution system is singular");
  }
  Vector pi = lu.solve(rhs);

  const double scale = std::max(1.0, max_abs(conservative));
  if ((pi.transpose() * conservative).cwiseAbs().maxCoeff() > 1e-9 * scale ||
      pi.minCoeff() < -1e-12) {
    throw Error(ErrorCode::SingularSolve, "stationary distribution solve failed to converge");
  }
  return pi.cwiseMax(0.0);
}

RegimeTag classify(bool defective, double mu, double drift_tol) {
  if (defective) return RegimeTag::C2Defective;
  if (mu > drift_tol) return RegimeTag::C2PositiveDrift;
  if (mu < -drift_tol) return RegimeTag::C1NegativeDrift;
  return RegimeTag::C1ZeroDrift;
}

}  // namespace

LatticeModel LatticeModel::create(std::vector<Matrix> blocks) {
  if (blocks.size() < 2) {
    throw Error(ErrorCode::BadModelFile, "a lattice model needs at least blocks A_{-1} and A_0");
  }
  const int n = static_cast<int>(blocks[0].rows());
  if (n < 1) throw Error(ErrorCode::BadModelFile, "empty phase space");
  for (const Matrix& b : blocks) {
    if (b.rows() != n || b.cols() != n || !finite(b)) {
      throw Error(ErrorCode::BadModelFile, "blocks must be finite square matrices of equal size");
    }
  }

  double scale = 0.0;
  for (const Matrix& b : blocks) scale = std::max(scale, max_abs(b));
  if (scale == 0.0) throw Error(ErrorCode::BadDiagonal, "model has no transitions at all");
  const double eps = kRateEps * std::max(1.0, scale);

  for (size_t idx = 0; idx < blocks.size(); ++idx) {
    const int m = static_cast<int>(idx) - 1;
    const Matrix& b = blocks[idx];
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (m == 0 && i == j) continue;
        if (b(i, j) < 0.0) {
          throw Error(ErrorCode::NegativeRate,
                      "negative rate in A_" + std::to_string(m) + " at (" + std::to_string(i) +
                          "," + std::to_string(j) + ")");
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!(blocks[1](i, i) < 0.0)) {
      throw Error(ErrorCode::BadDiagonal,
                  "diagonal of A_0 must be strictly negative (phase " + std::to_string(i) + ")");
    }
  }

  Matrix total = Matrix::Zero(n, n);
  for (const Matrix& b : blocks) total += b;
  Vector row_sums = total.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (row_sums(i) > eps) {
      throw Error(ErrorCode::RowSumExceedsZero,
                  "row " + std::to_string(i) + " of sum_m A_m is strictly positive");
    }
  }

  LatticeModel model;
  model.n_ = n;
  model.blocks_ = std::move(blocks);
  model.kill_ = (-row_sums).cwiseMax(0.0);
  model.exit_rates_ = -model.blocks_[1].diagonal();
  model.defective_ = model.kill_.maxCoeff() > eps;

  Matrix conservative = total;
  conservative.diagonal() += model.kill_;
  if (!strongly_connected(generator_graph(conservative, eps))) {
    throw Error(ErrorCode::ReducibleGenerator, "phase generator Q is not irreducible");
  }
  if (!bivariate_irreducible(model.blocks_, n, eps)) {
    throw Error(ErrorCode::ReducibleChain, "the level-phase chain (X,J) is not irreducible");
  }
  return model;
}

Matrix LatticeModel::generator() const {
  Matrix total = Matrix::Zero(n_, n_);
  for (const Matrix& b : blocks_) total += b;
  return total;
}

Matrix LatticeModel::conservative_generator() const {
  Matrix q = generator();
  q.diagonal() += kill_;
  return q;
}

Matrix LatticeModel::jump_block(int m) const {
  Matrix b = exit_rates_.cwiseInverse().asDiagonal() * block(m);
  if (m == 0) b += Matrix::Identity(n_, n_);
  return b;
}

CMatrix LatticeModel::F(Complex z) const {
  if (z == Complex(0.0, 0.0)) throw Error(ErrorCode::ZeroArgument, "F(z) requires z != 0");
  CMatrix out = CMatrix::Zero(n_, n_);
  Complex p = Complex(1.0, 0.0);  // z^{m+1}, starting at m = -1
  for (const Matrix& b : blocks_) {
    out += p * b.cast<Complex>();
    p *= z;
  }
  return out;
}

Matrix LatticeModel::F(double z) const {
  if (z == 0.0) throw Error(ErrorCode::ZeroArgument, "F(z) requires z != 0");
  Matrix out = Matrix::Zero(n_, n_);
  double p = 1.0;
  for (const Matrix& b : blocks_) {
    out += p * b;
    p *= z;
  }
  return out;
}

LatticeModel LatticeModel::with_killing(const Vector& extra_q) const {
  if (extra_q.size() != n_) throw Error(ErrorCode::BadModelFile, "extra_killing has wrong length");
  if (extra_q.minCoeff() < 0.0) throw Error(ErrorCode::NegativeRate, "extra killing must be >= 0");
  std::vector<Matrix> blocks = blocks_;
  blocks[1] -= Matrix(extra_q.asDiagonal());
  return create(std::move(blocks));
}

MmbmModel MmbmModel::create(Vector drift, Vector variance, Matrix generator) {
  const int n = static_cast<int>(drift.size());
  if (n < 1) throw Error(ErrorCode::BadModelFile, "empty phase space");
  if (variance.size() != n || generator.rows() != n || generator.cols() != n ||
      !drift.allFinite() || !variance.allFinite() || !finite(generator)) {
    throw Error(ErrorCode::BadModelFile, "drift, sigma2 and Q must be finite and consistently sized");
  }

  const double scale = std::max({1.0, max_abs(generator), drift.cwiseAbs().maxCoeff(),
                                 variance.cwiseAbs().maxCoeff()});
  const double eps = kRateEps * scale;

  for (int i = 0; i < n; ++i) {
    if (variance(i) < 0.0) throw Error(ErrorCode::NegativeRate, "sigma2 must be >= 0");
    for (int j = 0; j < n; ++j) {
      if (i != j && generator(i, j) < 0.0) {
        throw Error(ErrorCode::NegativeRate, "negative off-diagonal rate in Q");
      }
    }
    if (generator.row(i).sum() > eps) {
      throw Error(ErrorCode::RowSumExceedsZero, "row " + std::to_string(i) + " of Q is positive");
    }
    if (variance(i) <= 0.0 && !(drift(i) < 0.0)) {
      throw Error(ErrorCode::SubordinatorPhase,
                  "phase " + std::to_string(i) + " has sigma2 = 0 and drift >= 0");
    }
  }

  MmbmModel model;
  model.n_ = n;
  model.drift_ = std::move(drift);
  model.variance_ = std::move(variance);
  model.q_ = std::move(generator);
  model.kill_ = (-model.q_.rowwise().sum()).cwiseMax(0.0);
  model.defective_ = model.kill_.maxCoeff() > eps;

  if (n > 1) {
    Matrix conservative = model.q_;
    conservative.diagonal() += model.kill_;
    if (!strongly_connected(generator_graph(conservative, eps))) {
      throw Error(ErrorCode::ReducibleGenerator, "phase generator Q is not irreducible");
    }
  }
  return model;
}

Matrix MmbmModel::conservative_generator() const {
  Matrix q = q_;
  q.diagonal() += kill_;
  return q;
}

bool MmbmModel::all_brownian() const { return variance_.minCoeff() > 0.0; }

CMatrix MmbmModel::F(Complex alpha) const {
  CMatrix out = q_.cast<Complex>();
  for (int i = 0; i < n_; ++i) {
    out(i, i) += 0.5 * variance_(i) * alpha * alpha + drift_(i) * alpha;
  }
  return out;
}

Matrix MmbmModel::F(double alpha) const {
  Matrix out = q_;
  for (int i = 0; i < n_; ++i) {
    out(i, i) += 0.5 * variance_(i) * alpha * alpha + drift_(i) * alpha;
  }
  return out;
}

MmbmModel MmbmModel::with_killing(const Vector& extra_q) const {
  if (extra_q.size() != n_) throw Error(ErrorCode::BadModelFile, "extra_killing has wrong length");
  if (extra_q.minCoeff() < 0.0) throw Error(ErrorCode::NegativeRate, "extra killing must be >= 0");
  Matrix q = q_;
  q.diagonal() -= extra_q;
  return create(drift_, variance_, std::move(q));
}

MmbmModel MmbmModel::negated() const { return create(-drift_, variance_, q_); }

Regime drift_and_pi(const LatticeModel& model, double drift_tol) {
  Regime regime;
  regime.pi = stationary_distribution(model.conservative_generator());

  Matrix weighted = Matrix::Zero(model.phases(), model.phases());
  for (int m = -1; m <= model.max_jump(); ++m) weighted += static_cast<double>(m) * model.block(m);
  regime.mu = regime.pi.dot(weighted.rowwise().sum());
  regime.tag = classify(model.defective(), regime.mu, drift_tol);
  return regime;
}

Regime drift_and_pi(const MmbmModel& model, double drift_tol) {
  Regime regime;
  regime.pi = model.phases() == 1 ? Vector::Ones(1)
                                  : stationary_distribution(model.conservative_generator());
  regime.mu = regime.pi.dot(model.drift());
  regime.tag = classify(model.defective(), regime.mu, drift_tol);
  return regime;
}

Regime drift_and_pi(const Model& model, double drift_tol) {
  return std::visit([&](const auto& m) { return drift_and_pi(m, drift_tol); }, model);
}

LatticeModel reverse(const LatticeModel& model) {
  const Vector pi = drift_and_pi(model).pi;
  const Matrix d = pi.asDiagonal();
  const Matrix d_inv = pi.cwiseInverse().asDiagonal();
  std::vector<Matrix> blocks;
  blocks.reserve(model.blocks().size());
  for (const Matrix& b : model.blocks()) blocks.push_back(d_inv * b.transpose() * d);
  return LatticeModel::create(std::move(blocks));
}

MmbmModel reverse(const MmbmModel& model) {
  const Vector pi = drift_and_pi(model).pi;
  const Matrix d = pi.asDiagonal();
  const Matrix d_inv = pi.cwiseInverse().asDiagonal();
  return MmbmModel::create(model.drift(), model.variance(), d_inv * model.generator().transpose() * d);
}

}  // namespace mapkit
