#include "mapkit/sim.hpp"

#include <algorithm>
#include <cmath>

#include "mapkit/rng.hpp"

namespace mapkit {

namespace {

struct LatticeEvent {
  double cum;  // cumulative probability within the phase
  int dx;
  int to;
};

// Per-phase event tables of the embedded jump chain; the killing event is the
// remaining probability mass above the last cumulative entry.
struct LatticeSimTables {
  int n = 0;
  std::vector<double> exit_rate;
  std::vector<std::vector<LatticeEvent>> events;

  explicit LatticeSimTables(const LatticeModel& model) {
    n = model.phases();
    exit_rate.resize(static_cast<size_t>(n));
    events.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double rate = model.exit_rates()(i);
      exit_rate[static_cast<size_t>(i)] = rate;
      double cum = 0.0;
      for (int m = -1; m <= model.max_jump(); ++m) {
        const Matrix& block = model.block(m);
        for (int j = 0; j < n; ++j) {
          if (m == 0 && i == j) continue;
          const double p = block(i, j) / rate;
          if (p <= 0.0) continue;
          cum += p;
          events[static_cast<size_t>(i)].push_back({cum, m, j});
        }
      }
    }
  }
};

struct PathState {
  long x = 0;
  int phase = 0;
  bool killed = false;

  // true while the path is alive; false once killed
  bool jump(const LatticeSimTables& tables, Rng& rng) {
    const auto& evs = tables.events[static_cast<size_t>(phase)];
    const double u = rng.uniform();
    for (const LatticeEvent& ev : evs) {
      if (u <= ev.cum) {
        x += ev.dx;
        phase = ev.to;
        return true;
      }
    }
    killed = true;
    return false;
  }

  double hold(const LatticeSimTables& tables, Rng& rng) {
    return rng.exponential(tables.exit_rate[static_cast<size_t>(phase)]);
  }
};

// Runs one lattice path; fills the length-N contribution row and reports
// whether the path was cut by a cap before the target was decided.
bool run_lattice_path(const LatticeSimTables& tables, const SimTarget& t, const SimConfig& cfg,
                      Rng& rng, int start_phase, Vector& contrib) {
  PathState s;
  s.phase = start_phase;
  long xmax = 0;
  long xmin = 0;
  double clock = 0.0;

  // targets decided at time zero
  if ((t.kind == SimTarget::Kind::HitDown || t.kind == SimTarget::Kind::HitUp) && t.k == 0) {
    contrib(s.phase) += 1.0;
    return false;
  }
  if (t.kind == SimTarget::Kind::Exit) {
    if (t.a == 0) {
      contrib(s.phase) += 1.0;
      return false;
    }
    if (t.b == 0) return false;  // tau_0^up = 0 beats any down passage
  }

  const bool timed = t.kind == SimTarget::Kind::StripOccupation ||
                     t.kind == SimTarget::Kind::Theta || t.kind == SimTarget::Kind::Phi;
  const long timed_level = t.kind == SimTarget::Kind::StripOccupation ? t.k
                           : t.kind == SimTarget::Kind::Phi           ? t.m
                                                                      : 0;

  for (long ev = 0; ev < cfg.max_events; ++ev) {
    if (timed) {
      const double dt = s.hold(tables, rng);
      if (s.x == timed_level) contrib(s.phase) += dt;
      clock += dt;
      if (clock > cfg.time_cap) return true;
    }

    const int phase_at_jump = s.phase;
    if (!s.jump(tables, rng)) {
      // killed: extrema targets are decided here, everything else sees a
      // plain "event did not happen"
      if (t.kind == SimTarget::Kind::ExtremaMax && xmax == t.m && s.x == t.m - t.l) {
        contrib(phase_at_jump) += 1.0;
      }
      if (t.kind == SimTarget::Kind::ExtremaMin && xmin == -t.m && s.x == -t.m + t.l) {
        contrib(phase_at_jump) += 1.0;
      }
      return false;
    }
    xmax = std::max(xmax, s.x);
    xmin = std::min(xmin, s.x);

    switch (t.kind) {
      case SimTarget::Kind::HitDown:
        if (s.x == -t.k) {
          contrib(s.phase) += 1.0;
          return false;
        }
        break;
      case SimTarget::Kind::HitUp:
        if (s.x == t.k) {
          contrib(s.phase) += 1.0;
          return false;
        }
        break;
      case SimTarget::Kind::Exit:
        if (s.x == -t.a) {
          contrib(s.phase) += 1.0;
          return false;
        }
        if (s.x >= t.b) return false;
        break;
      case SimTarget::Kind::Overshoot:
        if (s.x >= 0) {
          if (s.x == t.k) contrib(s.phase) += 1.0;
          return false;
        }
        break;
      case SimTarget::Kind::Creeping:
        if (s.x >= t.m) {
          if (s.x == t.m) contrib(s.phase) += 1.0;
          return false;
        }
        break;
      case SimTarget::Kind::StripOccupation:
        if (s.x == -t.l || s.x >= t.m) return false;
        break;
      case SimTarget::Kind::Theta:
        if (s.x == -t.k) return false;
        break;
      case SimTarget::Kind::Phi:
        if (s.x >= t.m + 1) return false;
        break;
      case SimTarget::Kind::ExtremaMax:
      case SimTarget::Kind::ExtremaMin:
        break;
      default:
        break;
    }

    if (std::abs(s.x) >= cfg.level_cap) {
      // drifting far away: for first-passage style targets this is the
      // designed "does not happen" resolution, for killing-terminated
      // targets it is censoring
      const bool designed = t.kind == SimTarget::Kind::HitDown ||
                            t.kind == SimTarget::Kind::HitUp ||
                            t.kind == SimTarget::Kind::Overshoot ||
                            t.kind == SimTarget::Kind::Creeping;
      return !designed;
    }
  }
  return true;
}

}  // namespace

long sim_chunk_count(const SimConfig& config) {
  return (config.n_paths + kSimChunk - 1) / kSimChunk;
}

void SimPartial::merge(SimPartial other) {
  chunks.insert(chunks.end(), std::make_move_iterator(other.chunks.begin()),
                std::make_move_iterator(other.chunks.end()));
  std::sort(chunks.begin(), chunks.end(),
            [](const Chunk& a, const Chunk& b) { return a.index < b.index; });
  n_paths = std::max(n_paths, other.n_paths);
  seed = other.seed;
}

SimEstimate SimPartial::estimate() const {
  SimEstimate est;
  est.seed = seed;
  if (chunks.empty()) return est;
  const auto rows = chunks.front().sum.rows();
  const auto cols = chunks.front().sum.cols();
  Matrix sum = Matrix::Zero(rows, cols);
  Matrix sum_sq = Matrix::Zero(rows, cols);
  long paths = 0;
  for (const Chunk& c : chunks) {
    sum += c.sum;
    sum_sq += c.sum_sq;
    paths += c.paths;
    est.censored += c.censored;
  }
  est.n = paths;
  est.mean = sum / static_cast<double>(paths);
  est.std_error = Matrix::Zero(rows, cols);
  if (paths > 1) {
    const double np = static_cast<double>(paths);
    Matrix var = (sum_sq - np * est.mean.cwiseProduct(est.mean)) / (np - 1.0);
    est.std_error = (var.cwiseMax(0.0) / np).cwiseSqrt();
  }
  return est;
}

SimPartial sim_lattice_partial(const LatticeModel& model, const SimTarget& target,
                               const SimConfig& config, long chunk_begin, long chunk_end) {
  if (target.kind == SimTarget::Kind::ExtremaMax || target.kind == SimTarget::Kind::ExtremaMin) {
    if (!model.defective()) {
      throw Error(ErrorCode::NotDefective, "extrema targets need a defective model");
    }
  }
  const LatticeSimTables tables(model);
  const int n = model.phases();

  SimPartial partial;
  partial.n_paths = config.n_paths;
  partial.seed = config.seed;
  Vector contrib(n);
  for (long c = chunk_begin; c < chunk_end; ++c) {
    SimPartial::Chunk chunk;
    chunk.index = c;
    chunk.sum = Matrix::Zero(n, n);
    chunk.sum_sq = Matrix::Zero(n, n);
    const long p_begin = c * kSimChunk;
    const long p_end = std::min(config.n_paths, (c + 1) * kSimChunk);
    for (long p = p_begin; p < p_end; ++p) {
      for (int i = 0; i < n; ++i) {
        const uint64_t path_id =
            static_cast<uint64_t>(p) * static_cast<uint64_t>(n) + static_cast<uint64_t>(i);
        Rng rng = Rng::for_path(config.seed, path_id);
        contrib.setZero();
        const bool censored = run_lattice_path(tables, target, config, rng, i, contrib);
        chunk.sum.row(i) += contrib.transpose();
        chunk.sum_sq.row(i) += contrib.cwiseProduct(contrib).transpose();
        if (censored) ++chunk.censored;
      }
      ++chunk.paths;
    }
    partial.chunks.push_back(std::move(chunk));
  }
  return partial;
}

SimEstimate sim_lattice(const LatticeModel& model, const SimTarget& target,
                        const SimConfig& config) {
  SimPartial partial = sim_lattice_partial(model, target, config, 0, sim_chunk_count(config));
  SimEstimate est = partial.estimate();
  if (est.censored == est.n * model.phases() && est.n > 0) {
    throw Error(ErrorCode::CapExceeded, "every path was cut by a cap; no usable statistics");
  }
  return est;
}

namespace {

// One MMBM path: Euler steps inside a phase, exact exponential clocks for
// phase changes and killing. Barrier crossings are checked per Euler step.
bool run_mmbm_path(const MmbmModel& model, const SimTarget& t, const SimConfig& cfg, Rng& rng,
                   int start_phase, Vector& contrib) {
  const int n = model.phases();
  double x = 0.0;
  int phase = start_phase;
  double clock = 0.0;

  const double lo = t.kind == SimTarget::Kind::MmbmExit ? -t.xa
                                                        : -static_cast<double>(cfg.level_cap);
  const double hi = t.kind == SimTarget::Kind::MmbmExit ? t.xb : t.x;

  if (t.kind == SimTarget::Kind::MmbmExit && t.xa <= 0.0) {
    contrib(phase) += 1.0;  // tau_0 = 0
    return false;
  }

  while (clock < cfg.time_cap) {
    const double rate = -model.generator()(phase, phase);
    const double phase_clock = rate > 0.0 ? rng.exponential(rate)
                                          : std::numeric_limits<double>::infinity();
    const double a = model.drift()(phase);
    const double sigma = std::sqrt(model.variance()(phase));

    double tau = 0.0;
    while (tau < phase_clock) {
      const double dt = std::min(cfg.euler_dt, phase_clock - tau);
      x += a * dt + (sigma > 0.0 ? sigma * std::sqrt(dt) * rng.normal() : 0.0);
      tau += dt;
      clock += dt;
      if (x <= lo) {
        if (t.kind == SimTarget::Kind::MmbmExit) contrib(phase) += 1.0;
        return false;  // for MmbmHitUp this is the designed "drifted away"
      }
      if (x >= hi) {
        if (t.kind == SimTarget::Kind::MmbmHitUp) contrib(phase) += 1.0;
        return false;
      }
      if (clock > cfg.time_cap) return true;
    }

    if (!std::isfinite(phase_clock)) return true;
    // phase event: jump or kill
    const double u = rng.uniform() * rate;
    double cum = 0.0;
    int next = -1;
    for (int j = 0; j < n; ++j) {
      if (j == phase) continue;
      cum += model.generator()(phase, j);
      if (u <= cum) {
        next = j;
        break;
      }
    }
    if (next < 0) return false;  // killed
    phase = next;
  }
  return true;
}

}  // namespace

SimPartial sim_mmbm_partial(const MmbmModel& model, const SimTarget& target,
                            const SimConfig& config, long chunk_begin, long chunk_end) {
  const int n = model.phases();
  SimPartial partial;
  partial.n_paths = config.n_paths;
  partial.seed = config.seed;
  Vector contrib(n);
  for (long c = chunk_begin; c < chunk_end; ++c) {
    SimPartial::Chunk chunk;
    chunk.index = c;
    chunk.sum = Matrix::Zero(n, n);
    chunk.sum_sq = Matrix::Zero(n, n);
    const long p_begin = c * kSimChunk;
    const long p_end = std::min(config.n_paths, (c + 1) * kSimChunk);
    for (long p = p_begin; p < p_end; ++p) {
      for (int i = 0; i < n; ++i) {
        const uint64_t path_id =
            static_cast<uint64_t>(p) * static_cast<uint64_t>(n) + static_cast<uint64_t>(i);
        Rng rng = Rng::for_path(config.seed, path_id);
        contrib.setZero();
        const bool censored = run_mmbm_path(model, target, config, rng, i, contrib);
        chunk.sum.row(i) += contrib.transpose();
        chunk.sum_sq.row(i) += contrib.cwiseProduct(contrib).transpose();
        if (censored) ++chunk.censored;
      }
      ++chunk.paths;
    }
    partial.chunks.push_back(std::move(chunk));
  }
  return partial;
}

SimEstimate sim_mmbm(const MmbmModel& model, const SimTarget& target, const SimConfig& config) {
  SimPartial partial = sim_mmbm_partial(model, target, config, 0, sim_chunk_count(config));
  SimEstimate est = partial.estimate();
  if (est.censored == est.n * model.phases() && est.n > 0) {
    throw Error(ErrorCode::CapExceeded, "every path was cut by a cap; no usable statistics");
  }
  return est;
}

}  // namespace mapkit
