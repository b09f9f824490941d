#pragma once

#include <string>
#include <vector>

#include "mapkit/model.hpp"

namespace mapkit {

enum class CheckStatus { Pass, Fail, Skip };

struct Check {
  std::string name;
  CheckStatus status = CheckStatus::Skip;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string reason;  // skip reason or failure note
};

struct VerifyOptions {
  // solver tolerance for transient models; zero-drift models are solved at
  // max(solve_tol, 1e-10) because the minimal-solution iteration is only
  // sublinear there
  double solve_tol = 1e-12;
  long max_iter = 1'000'000;
  int horizon = 30;
  double drift_tol = kDriftTol;
};

std::vector<Check> verify_model(const Model& model, const VerifyOptions& opts = {});

bool all_passed(const std::vector<Check>& checks);

// Deterministic random lattice model: N in {2,3,4}, M in {1,2,3}, uniform
// rates, defective on odd seeds.
LatticeModel random_lattice_model(uint64_t seed);

}  // namespace mapkit
