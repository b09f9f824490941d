#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mapkit/extrema.hpp"
#include "mapkit/fluctuation.hpp"
#include "mapkit/mmbm.hpp"
#include "mapkit/sim.hpp"

using namespace mapkit;
using namespace mapkit::testing;

namespace {

SimConfig config(long n, uint64_t seed = 42) {
  SimConfig cfg;
  cfg.n_paths = n;
  cfg.seed = seed;
  return cfg;
}

// |analytic - estimate| within 4 standard errors (plus an absolute floor for
// deterministic entries)
void check_within(const Matrix& analytic, const SimEstimate& est, double floor = 1e-12) {
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      CAPTURE(i);
      CAPTURE(j);
      CHECK(std::abs(analytic(i, j) - est.mean(i, j)) <= 4.0 * est.std_error(i, j) + floor);
    }
  }
}

}  // namespace

TEST_CASE("estimates are reproducible bit for bit") {
  const LatticeModel model = bd(2, 1);
  SimTarget target{SimTarget::Kind::Exit};
  target.a = 1;
  target.b = 2;
  const SimEstimate first = sim_lattice(model, target, config(5000));
  const SimEstimate second = sim_lattice(model, target, config(5000));
  CHECK(first.mean(0, 0) == second.mean(0, 0));
  CHECK(first.std_error(0, 0) == second.std_error(0, 0));
  CHECK(first.censored == second.censored);
}

TEST_CASE("chunk-aligned sharding pools to the identical estimate") {
  const LatticeModel model = three_phase_defective();
  SimTarget target{SimTarget::Kind::StripOccupation};
  target.k = 0;
  target.l = 2;
  target.m = 2;
  const SimConfig cfg = config(3 * kSimChunk + 17, 7);

  const SimEstimate whole = sim_lattice(model, target, cfg);
  SimPartial left = sim_lattice_partial(model, target, cfg, 0, 2);
  SimPartial right = sim_lattice_partial(model, target, cfg, 2, sim_chunk_count(cfg));
  left.merge(std::move(right));
  const SimEstimate pooled = left.estimate();

  CHECK(pooled.n == whole.n);
  CHECK((pooled.mean - whole.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pooled.std_error - whole.std_error).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("certain absorption has zero standard error") {
  SimTarget target{SimTarget::Kind::HitDown};
  target.k = 1;
  const SimEstimate est = sim_lattice(bd(1, 2), target, config(2000));
  CHECK(est.mean(0, 0) == doctest::Approx(1.0));
  CHECK(est.std_error(0, 0) == doctest::Approx(0.0));
  CHECK(est.censored == 0);
}

TEST_CASE("lattice targets agree with analytic values") {
  const long n = 40000;
  SUBCASE("G of BD(2,1)") {
    SimTarget target{SimTarget::Kind::HitDown};
    target.k = 1;
    Matrix expected(1, 1);
    expected << 0.5;
    check_within(expected, sim_lattice(bd(2, 1), target, config(n)));
  }
  SUBCASE("exit D_{2,3} of BD(1,2)") {
    SimTarget target{SimTarget::Kind::Exit};
    target.a = 2;
    target.b = 3;
    Matrix expected(1, 1);
    expected << (1.0 - std::pow(0.5, 3)) / (1.0 - std::pow(0.5, 5));
    check_within(expected, sim_lattice(bd(1, 2), target, config(n)));
  }
  SUBCASE("overshoot law of BD(1,2)") {
    for (long level : {0L, 1L}) {
      SimTarget target{SimTarget::Kind::Overshoot};
      target.k = level;
      Matrix expected(1, 1);
      expected << 1.0 / 3.0;
      check_within(expected, sim_lattice(bd(1, 2), target, config(n)));
    }
  }
  SUBCASE("creeping at level 2 of BD(1,2)") {
    SimTarget target{SimTarget::Kind::Creeping};
    target.m = 2;
    Matrix expected(1, 1);
    expected << 0.25;
    check_within(expected, sim_lattice(bd(1, 2), target, config(n)));
  }
  SUBCASE("strip occupation of BD(1,2)") {
    SimTarget target{SimTarget::Kind::StripOccupation};
    target.k = 0;
    target.l = 2;
    target.m = 2;
    Matrix expected(1, 1);
    expected << 0.6;
    check_within(expected, sim_lattice(bd(1, 2), target, config(n)));
  }
  SUBCASE("theta of the killed pure-death chain") {
    SimTarget target{SimTarget::Kind::Theta};
    target.k = 2;
    Matrix expected(1, 1);
    expected << 0.5;  // never returns to 0: expected holding time 1/(1+1)
    check_within(expected, sim_lattice(pure_death(1.0, 1.0), target, config(n)));
  }
  SUBCASE("phi matches the holding-time identity") {
    // no up moves and no return: mean sojourn at 0 is 1/|A_0|
    SimTarget target{SimTarget::Kind::Phi};
    target.m = 0;
    Matrix expected(1, 1);
    expected << 1.0 / 3.0;
    check_within(expected, sim_lattice(pure_death(2.0, 1.0), target, config(n)));
  }
}

TEST_CASE("3-phase targets agree with the analytic modules") {
  const LatticeModel model = three_phase_defective();
  const Fundamentals fund = compute_fundamentals(model, {});
  const TabooTables tables = build_taboo_tables(model, fund, 8);
  const long n = 20000;

  SUBCASE("G entries") {
    SimTarget target{SimTarget::Kind::HitDown};
    target.k = 1;
    check_within(fund.G, sim_lattice(model, target, config(n)));
  }
  SUBCASE("two-sided exit") {
    SimTarget target{SimTarget::Kind::Exit};
    target.a = 1;
    target.b = 2;
    check_within(two_sided_exit(model, tables, fund.R, 1, 2).D,
                 sim_lattice(model, target, config(n)));
  }
  SUBCASE("strip occupation") {
    SimTarget target{SimTarget::Kind::StripOccupation};
    target.k = 0;
    target.l = 2;
    target.m = 2;
    check_within(strip_occupation(model, fund, tables, 0, 2, 2),
                 sim_lattice(model, target, config(n)));
  }
  SUBCASE("overshoot law leaks mass under killing") {
    for (long level : {0L, 1L}) {
      SimTarget target{SimTarget::Kind::Overshoot};
      target.k = level;
      check_within(fund.overshoot[static_cast<size_t>(level)],
                   sim_lattice(model, target, config(n)));
    }
  }
  SUBCASE("extrema cells record the pre-killing state") {
    for (auto [m, l] : {std::pair<long, long>{0, 0}, {1, 1}}) {
      SimTarget target{SimTarget::Kind::ExtremaMax};
      target.m = m;
      target.l = l;
      check_within(max_at_killing(model, fund, tables, m, l),
                   sim_lattice(model, target, config(n)));
      SimTarget mins{SimTarget::Kind::ExtremaMin};
      mins.m = m;
      mins.l = l;
      check_within(min_at_killing(model, fund, m, l), sim_lattice(model, mins, config(n)));
    }
  }
}

TEST_CASE("extrema simulation needs killing") {
  SimTarget target{SimTarget::Kind::ExtremaMax};
  CHECK_THROWS_WITH_AS((void)sim_lattice(bd(1, 2), target, config(10)),
                       doctest::Contains("NotDefective"), Error);
}

TEST_CASE("censoring is counted, not silently mixed") {
  // positive drift: theta paths that drift away are cut at the level cap
  SimTarget target{SimTarget::Kind::Theta};
  target.k = 1;
  SimConfig cfg = config(2000);
  cfg.level_cap = 16;
  const SimEstimate est = sim_lattice(bd(2, 1), target, cfg);
  CHECK(est.censored > 0);
  CHECK(est.censored < est.n);
}

TEST_CASE("MMBM simulation") {
  SUBCASE("deterministic fluid descent is exact") {
    Vector a(1), s2(1);
    a << -1.0;
    s2 << 0.0;
    const MmbmModel model = MmbmModel::create(a, s2, Matrix::Zero(1, 1));
    SimTarget target{SimTarget::Kind::MmbmExit};
    target.xa = 1.0;
    target.xb = 5.0;
    const SimEstimate est = sim_mmbm(model, target, config(200));
    CHECK(est.mean(0, 0) == doctest::Approx(1.0));
    CHECK(est.std_error(0, 0) == doctest::Approx(0.0));
  }
  SUBCASE("scalar Brownian exit against the closed form") {
    const MmbmModel model = scalar_mmbm(-1.0, 2.0, 0.0);
    SimTarget target{SimTarget::Kind::MmbmExit};
    target.xa = 1.0;
    target.xb = 1.0;
    SimConfig cfg = config(20000);
    cfg.euler_dt = 1e-3;
    const SimEstimate est = sim_mmbm(model, target, cfg);
    const double expected = (1.0 - std::exp(-1.0)) / (1.0 - std::exp(-2.0));
    CHECK(std::abs(est.mean(0, 0) - expected) <=
          std::max(4.0 * est.std_error(0, 0), 5e-3));
  }
  SUBCASE("2-phase exit against the analytic module") {
    const MmbmModel model = two_phase_mmbm();
    const MmbmFluct fluct = build_mmbm_fluct(model, {});
    SimTarget target{SimTarget::Kind::MmbmExit};
    target.xa = 0.7;
    target.xb = 1.1;
    SimConfig cfg = config(8000);
    cfg.euler_dt = 1e-3;
    const SimEstimate est = sim_mmbm(model, target, cfg);
    const Matrix expected = mmbm_exit(fluct, 0.7, 1.1);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(expected(i, j) - est.mean(i, j)) <=
              std::max(4.0 * est.std_error(i, j), 5e-3));
      }
    }
  }
  SUBCASE("hitting a positive level matches e^{Lambda x}") {
    const MmbmModel model = two_phase_mmbm();
    const MmbmFluct fluct = build_mmbm_fluct(model, {});
    SimTarget target{SimTarget::Kind::MmbmHitUp};
    target.x = 0.8;
    SimConfig cfg = config(8000);
    cfg.euler_dt = 1e-3;
    cfg.level_cap = 40;
    const SimEstimate est = sim_mmbm(model, target, cfg);
    const Matrix expected = expm(0.8 * fluct.Lambda());
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(expected(i, j) - est.mean(i, j)) <=
              std::max(4.0 * est.std_error(i, j), 5e-3));
      }
    }
  }
  SUBCASE("mmbm sharding pools exactly") {
    const MmbmModel model = two_phase_mmbm();
    SimTarget target{SimTarget::Kind::MmbmExit};
    target.xa = 0.5;
    target.xb = 0.5;
    SimConfig cfg = config(2 * kSimChunk + 5, 11);
    const SimEstimate whole = sim_mmbm(model, target, cfg);
    SimPartial left = sim_mmbm_partial(model, target, cfg, 0, 1);
    SimPartial right = sim_mmbm_partial(model, target, cfg, 1, sim_chunk_count(cfg));
    left.merge(std::move(right));
    const SimEstimate pooled = left.estimate();
    CHECK((pooled.mean - whole.mean).cwiseAbs().maxCoeff() == 0.0);
  }
}
