#pragma once

#include <vector>

#include "mapkit/fluctuation.hpp"
#include "mapkit/taboo.hpp"

namespace mapkit {

struct ExtremaCell {
  long m = 0;  // level of the extremum (max at +m, min at -m)
  long l = 0;  // distance from the extremum to the position at killing
  Matrix prob;
};

// Joint law of (running extremum, position and phase at the killing time)
// over an adaptively grown grid; the remaining mass is bounded per starting
// phase.
struct ExtremaLaw {
  bool is_max = true;
  std::vector<ExtremaCell> cells;
  Vector captured_mass;  // per starting phase, summed over the grid
  Vector tail_bound;     // per starting phase
};

// P[max X = m, X at killing = m - l, J at killing] = Phi(m) R^l diag(q)
Matrix max_at_killing(const LatticeModel& model, const Fundamentals& fund,
                      const TabooTables& tables, long m, long l);

// P[min X = -m, X at killing = -m + l, J at killing] = G^m E[L(l, tau_{-1})] diag(q)
Matrix min_at_killing(const LatticeModel& model, const Fundamentals& fund, long m, long l);

// Scale-matrix forms (nonsingular A_{-1}), used as cross-checks.
Matrix max_at_killing_scale_form(const LatticeModel& model, const ScaleTable& table,
                                 const Matrix& r, long m, long l);
Matrix min_at_killing_scale_form(const LatticeModel& model, const Fundamentals& fund,
                                 const ScaleTable& table, long m, long l);

ExtremaLaw extrema_law(const LatticeModel& model, const Fundamentals& fund,
                       const TabooTables& tables, bool is_max, double tail_target = 1e-10,
                       long max_horizon = 4096);

}  // namespace mapkit
