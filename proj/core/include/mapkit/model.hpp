#pragma once

#include <variant>
#include <vector>

#include "mapkit/errors.hpp"
#include "mapkit/types.hpp"

namespace mapkit {

// Rates smaller than this (relative to the largest rate in the model) are
// treated as structural zeros when classifying defectivity and building the
// reachability graphs.
inline constexpr double kRateEps = 1e-12;

// Drift magnitudes below this are classified as zero drift. The
// classification decides which occupation-time formulas are legal, so it is
// configurable on drift_and_pi.
inline constexpr double kDriftTol = 1e-10;

enum class RegimeTag { C1ZeroDrift, C1NegativeDrift, C2Defective, C2PositiveDrift };

const char* to_string(RegimeTag tag);

struct Regime {
  RegimeTag tag;
  Vector pi;   // stationary distribution of the conservative generator
  double mu;   // asymptotic drift

  bool defective() const { return tag == RegimeTag::C2Defective; }
  // Transient: defective or nonzero drift. Occupation matrices are finite.
  bool transient() const { return tag != RegimeTag::C1ZeroDrift; }
};

// Continuous-time Markov chain on Z x {1..N}, skip-free downwards: blocks
// A_{-1}, A_0, ..., A_M of transition rates from level k to level k+m.
// Killing is stored implicitly as the deficit of the row sums of sum_m A_m.
class LatticeModel {
 public:
  // Validates every model invariant; blocks[i] is the block for jump size
  // i-1, so blocks.front() is A_{-1}. Throws Error on the first violation.
  static LatticeModel create(std::vector<Matrix> blocks);

  int phases() const { return n_; }
  int max_jump() const { return static_cast<int>(blocks_.size()) - 2; }

  // m in [-1, max_jump]
  const Matrix& block(int m) const { return blocks_[static_cast<size_t>(m + 1)]; }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  const Vector& kill_rates() const { return kill_; }
  bool defective() const { return defective_; }

  // diag(-A_0), the total transition rate out of each state
  const Vector& exit_rates() const { return exit_rates_; }

  // sum_m A_m; row sums are -q
  Matrix generator() const;
  // sum_m A_m + diag(q); row sums are 0
  Matrix conservative_generator() const;

  // Transition probabilities of the chain embedded at jump epochs; killing
  // appears as a row-sum deficit.
  Matrix jump_block(int m) const;

  // F(z) = z sum_m z^m A_m, z != 0
  CMatrix F(Complex z) const;
  Matrix F(double z) const;

  LatticeModel with_killing(const Vector& extra_q) const;

 private:
  LatticeModel() = default;

  int n_ = 0;
  std::vector<Matrix> blocks_;  // A_{-1} .. A_M
  Vector kill_;
  Vector exit_rates_;
  bool defective_ = false;
};

// Markov-modulated Brownian motion: per-phase drift and variance, no jumps.
// The stored generator has row sums -q (killing as a row-sum deficit).
class MmbmModel {
 public:
  static MmbmModel create(Vector drift, Vector variance, Matrix generator);

  int phases() const { return n_; }
  const Vector& drift() const { return drift_; }
  const Vector& variance() const { return variance_; }
  const Matrix& generator() const { return q_; }
  Matrix conservative_generator() const;

  const Vector& kill_rates() const { return kill_; }
  bool defective() const { return defective_; }
  bool all_brownian() const;  // every phase has positive variance

  // F(alpha) = 1/2 diag(sigma^2) alpha^2 + diag(a) alpha + Q
  CMatrix F(Complex alpha) const;
  Matrix F(double alpha) const;

  MmbmModel with_killing(const Vector& extra_q) const;
  // The level-negated process (-X, J): drift flips sign. Used for upward
  // first passage. Throws SubordinatorPhase if a fluid phase would become
  // non-decreasing.
  MmbmModel negated() const;

 private:
  MmbmModel() = default;

  int n_ = 0;
  Vector drift_;
  Vector variance_;
  Matrix q_;
  Vector kill_;
  bool defective_ = false;
};

using Model = std::variant<LatticeModel, MmbmModel>;

Regime drift_and_pi(const LatticeModel& model, double drift_tol = kDriftTol);
Regime drift_and_pi(const MmbmModel& model, double drift_tol = kDriftTol);
Regime drift_and_pi(const Model& model, double drift_tol = kDriftTol);

LatticeModel reverse(const LatticeModel& model);
MmbmModel reverse(const MmbmModel& model);

}  // namespace mapkit
