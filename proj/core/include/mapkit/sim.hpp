#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mapkit/model.hpp"

namespace mapkit {

struct SimConfig {
  long n_paths = 100000;  // paths per starting phase
  uint64_t seed = 1;
  // |X| beyond which a path is abandoned; for targets where drifting away
  // means "the event will not happen" the resulting bias is geometrically
  // small in the cap
  long level_cap = 64;
  double time_cap = std::numeric_limits<double>::infinity();
  double euler_dt = 1e-3;  // MMBM step
  long max_events = 10'000'000;  // hard per-path event bound
};

struct SimEstimate {
  Matrix mean;
  Matrix std_error;
  long n = 0;  // paths per starting phase
  uint64_t seed = 0;
  long censored = 0;  // paths cut by a cap before the target was decided
};

struct SimTarget {
  enum class Kind {
    HitDown,          // P[J at tau_{-k}] = G^k;           uses k
    HitUp,            // P[J at tau_k], k > 0;             uses k
    Exit,             // D_{a,b};                          uses a, b
    Overshoot,        // A_k^up;                           uses k
    Creeping,         // P[tau_m = tau_m^up, J];           uses m
    StripOccupation,  // E[L(k, tau_{-l} /\ tau_m^up)];    uses k, l, m
    Theta,            // E[L(0, tau_{-k})];                uses k
    Phi,              // E[L(m, tau_{m+1}^up)];            uses m
    ExtremaMax,       // P[max = m, X = m-l, J at kill];   uses m, l
    ExtremaMin,       // P[min = -m, X = -m+l, J at kill]; uses m, l
    MmbmExit,         // P[tau_{-a} < tau_b^+, J];         uses xa, xb
    MmbmHitUp,        // P[J at tau_x] = e^{Lambda x};     uses x
  };
  Kind kind;
  long k = 0;
  long a = 0;
  long b = 0;
  long l = 0;
  long m = 0;
  double x = 0.0;
  double xa = 0.0;
  double xb = 0.0;
};

// Paths are keyed by (seed, path index), and partial sums are kept per chunk
// of kSimChunk path indices. Pooling partials from any chunk-aligned split
// reproduces the single-run estimate bit for bit.
inline constexpr long kSimChunk = 8192;

struct SimPartial {
  struct Chunk {
    long index = 0;
    Matrix sum;
    Matrix sum_sq;
    long paths = 0;
    long censored = 0;
  };
  std::vector<Chunk> chunks;  // sorted by chunk index
  long n_paths = 0;
  uint64_t seed = 0;

  void merge(SimPartial other);
  SimEstimate estimate() const;
};

long sim_chunk_count(const SimConfig& config);

SimPartial sim_lattice_partial(const LatticeModel& model, const SimTarget& target,
                               const SimConfig& config, long chunk_begin, long chunk_end);
SimEstimate sim_lattice(const LatticeModel& model, const SimTarget& target,
                        const SimConfig& config);

SimPartial sim_mmbm_partial(const MmbmModel& model, const SimTarget& target,
                            const SimConfig& config, long chunk_begin, long chunk_end);
SimEstimate sim_mmbm(const MmbmModel& model, const SimTarget& target, const SimConfig& config);

}  // namespace mapkit
