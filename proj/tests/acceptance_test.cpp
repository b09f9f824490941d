// Acceptance suite: one pass/fail line per criterion, all tolerances pinned
// in code. Run through ctest or directly; the binary exits nonzero if any
// criterion fails.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "mapkit/extrema.hpp"
#include "mapkit/fluctuation.hpp"
#include "mapkit/mmbm.hpp"
#include "mapkit/sim.hpp"
#include "mapkit/verify.hpp"

using namespace mapkit;
using namespace mapkit::testing;

namespace {

struct Criterion {
  std::string name;
  bool ok = true;
  std::ostringstream log;

  void expect(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      log << "    failed: " << what << "\n";
    }
  }
  void expect_le(double value, double bound, const std::string& what) {
    if (!(value <= bound)) {
      ok = false;
      char buf[160];
      std::snprintf(buf, sizeof buf, "    failed: %s (%.3e > %.3e)\n", what.c_str(), value, bound);
      log << buf;
    }
  }
};

bool report(Criterion& criterion, std::chrono::steady_clock::time_point start) {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("[acceptance] %-38s %s  (%.1f s)\n", criterion.name.c_str(),
              criterion.ok ? "PASS" : "FAIL", seconds);
  if (!criterion.ok) std::fputs(criterion.log.str().c_str(), stdout);
  std::fflush(stdout);
  return criterion.ok;
}

double rel_gap(double actual, double expected) {
  return std::abs(actual - expected) / std::max(1.0, std::abs(expected));
}

// the absolute floor covers deterministic entries (zero standard error),
// where the analytic side itself is only certified to the solver residual
void check_within_sigma(Criterion& c, const Matrix& analytic, const SimEstimate& est,
                        const std::string& what, double floor = 1e-9) {
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      const double gap = std::abs(analytic(i, j) - est.mean(i, j));
      c.expect_le(gap, 4.0 * est.std_error(i, j) + floor,
                  what + " entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
}

}  // namespace

TEST_CASE("criterion 1: closed-form birth-death family") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"1 birth-death closed forms"};

  for (auto [lambda, mu_t] : {std::pair<double, double>{1, 2}, {2, 1}, {1, 3}, {3, 1}}) {
    const std::string tag = "BD(" + std::to_string(static_cast<int>(lambda)) + "," +
                            std::to_string(static_cast<int>(mu_t)) + ")";
    const LatticeModel model = bd(lambda, mu_t);
    const Fundamentals fund = compute_fundamentals(model, {});
    const double g_expected = std::min(1.0, mu_t / lambda);
    c.expect_le(std::abs(fund.G(0, 0) - g_expected), 1e-10, tag + " G");
    c.expect_le(std::abs(fund.R(0, 0) - g_expected), 1e-10, tag + " R");
    c.expect_le(std::abs(fund.H(0, 0) - 1.0 / std::abs(lambda - mu_t)), 1e-10, tag + " H");

    // W(k) is the z^k coefficient of z F(z)^{-1} = z / (lambda (z-1)(z - mu~/lambda)):
    // (1 - r^{-k}) / (lambda (r - 1)) with r = mu~/lambda
    const double r = mu_t / lambda;
    const ScaleTable table = scale_matrices(model, 30);
    for (int k = 1; k <= 30; ++k) {
      const double expected = (1.0 - std::pow(r, -k)) / (lambda * (r - 1.0));
      c.expect_le(rel_gap(table.w[static_cast<size_t>(k)](0, 0), expected), 1e-10,
                  tag + " W(" + std::to_string(k) + ")");
    }

    // gambler's ruin: D_{a,b} = (1 - s^b) / (1 - s^{a+b}) with s = lambda/mu~
    const TabooTables tables = build_taboo_tables(model, fund, 21);
    const double s = lambda / mu_t;
    for (long a = 0; a <= 10; ++a) {
      for (long b = 1; b <= 10; ++b) {
        const double expected = (1.0 - std::pow(s, b)) / (1.0 - std::pow(s, a + b));
        const double actual = two_sided_exit(model, tables, fund.R, a, b).D(0, 0);
        c.expect_le(std::abs(actual - expected), 1e-10,
                    tag + " D_{" + std::to_string(a) + "," + std::to_string(b) + "}");
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect_le(seconds, 1.0, "runtime under 1 s");
  CHECK(report(c, start));
}

TEST_CASE("criterion 2: identity suite on 50 seeded random models") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"2 identity suite, 50 random models"};

  int defective = 0;
  for (uint64_t i = 0; i < 50; ++i) {
    const uint64_t seed = 1000 + i;
    const std::string tag = "seed " + std::to_string(seed);
    const LatticeModel model = random_lattice_model(seed);
    if (model.defective()) ++defective;
    const std::vector<Check> checks = verify_model(model, {});
    for (const Check& check : checks) {
      if (check.status == CheckStatus::Fail) {
        c.expect(false,
                 tag + ": " + check.name + " residual " + std::to_string(check.residual));
      }
    }

    // the headline identities again, at their fixed absolute tolerances
    const Fundamentals fund = compute_fundamentals(model, {});
    c.expect_le(fund.residuals.at("G"), 1e-9, tag + " G equation residual");
    c.expect_le(fund.residuals.at("R"), 1e-9, tag + " R equation residual");
    const TabooTables tables = build_taboo_tables(model, fund, 12);
    if (fund.H_finite) {
      c.expect_le(fund.residuals.at("GH_HR"), 1e-9, tag + " GH = HR");
    }
    if (is_invertible(model.block(-1))) {
      if (tables.theta_available) {
        Matrix g_pow = Matrix::Identity(model.phases(), model.phases());
        Matrix r_pow = g_pow;
        for (long k = 1; k <= 5; ++k) {
          g_pow = g_pow * fund.G;
          r_pow = r_pow * fund.R;
          c.expect_le(inf_norm(tables.theta[static_cast<size_t>(k)] * r_pow -
                               g_pow * tables.xi[static_cast<size_t>(k)]),
                      1e-9, tag + " Theta/Xi relation at k = " + std::to_string(k));
        }
      }
      const ScaleTable table = scale_matrices(model, 12);
      for (auto [a, b] : {std::pair<long, long>{1, 1}, {2, 1}, {1, 2}, {2, 3}}) {
        const Matrix via_xi = two_sided_exit(model, tables, fund.R, a, b).D;
        const Matrix via_w = d_ab_scale_form(table, a, b);
        c.expect_le(inf_norm(via_xi - via_w), 1e-8, tag + " exit Xi/W agreement");
        if (tables.theta_available && is_invertible(fund.G)) {
          c.expect_le(inf_norm(via_xi - d_ab_theta_form(tables, fund.G, a, b)), 1e-8,
                      tag + " exit Xi/Theta agreement");
        }
      }
      const ScaleTable wide = scale_matrices(model, 60);
      const double edge = min_abs_eigenvalue(fund.G);
      for (double frac : {0.25, 0.5}) {
        const TransformCheck check = check_scale_transform(model, wide, fund.G, frac * edge);
        c.expect_le(check.residual, check.tail_bound + 1e-8,
                    tag + " scale transform at z = " + std::to_string(frac * edge));
      }
    }
  }
  c.expect(defective == 25, "half of the models are defective");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect_le(seconds, 30.0, "runtime under 30 s");
  CHECK(report(c, start));
}

TEST_CASE("criterion 3: Monte Carlo agreement, n = 1e6") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"3 Monte Carlo agreement"};

  const std::vector<std::pair<std::string, LatticeModel>> models = {
      {"BD(1,2)", bd(1, 2)},
      {"BD(2,1)", bd(2, 1)},
      {"3-phase defective", three_phase_defective()},
      {"rank-1 A_{-1}", mph1(1.0, 3.0)},
      {"2-phase M=2", two_phase_m2()},
  };

  SimConfig cfg;
  cfg.n_paths = 1'000'000;
  cfg.seed = 20240321;
  cfg.level_cap = 40;

  for (const auto& [name, model] : models) {
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 8);

    SimTarget g_target{SimTarget::Kind::HitDown};
    g_target.k = 1;
    check_within_sigma(c, fund.G, sim_lattice(model, g_target, cfg), name + " G");

    SimTarget exit_target{SimTarget::Kind::Exit};
    exit_target.a = 1;
    exit_target.b = 2;
    check_within_sigma(c, two_sided_exit(model, tables, fund.R, 1, 2).D,
                       sim_lattice(model, exit_target, cfg), name + " D_{1,2}");

    SimTarget strip_target{SimTarget::Kind::StripOccupation};
    strip_target.k = 0;
    strip_target.l = 1;
    strip_target.m = 2;
    check_within_sigma(c, strip_occupation(model, fund, tables, 0, 1, 2),
                       sim_lattice(model, strip_target, cfg), name + " strip occupation");

    SimTarget creep_target{SimTarget::Kind::Creeping};
    creep_target.m = 2;
    check_within_sigma(c, creeping(tables, 2), sim_lattice(model, creep_target, cfg),
                       name + " creeping(2)");
  }

  // four extrema cells on the defective 3-phase model
  {
    const LatticeModel model = three_phase_defective();
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 8);
    for (auto [m, l] : {std::pair<long, long>{0, 0}, {1, 1}}) {
      SimTarget max_cell{SimTarget::Kind::ExtremaMax};
      max_cell.m = m;
      max_cell.l = l;
      check_within_sigma(c, max_at_killing(model, fund, tables, m, l),
                         sim_lattice(model, max_cell, cfg),
                         "max cell (" + std::to_string(m) + "," + std::to_string(l) + ")");
      SimTarget min_cell{SimTarget::Kind::ExtremaMin};
      min_cell.m = m;
      min_cell.l = l;
      check_within_sigma(c, min_at_killing(model, fund, m, l), sim_lattice(model, min_cell, cfg),
                         "min cell (" + std::to_string(m) + "," + std::to_string(l) + ")");
    }
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect_le(seconds, 120.0, "runtime under 2 min");
  CHECK(report(c, start));
}

TEST_CASE("criterion 4: extrema mass conservation") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"4 extrema mass conservation"};

  for (const auto& [name, model] :
       {std::pair<std::string, LatticeModel>{"killed BD(1,2)", bd(1, 2, 1.0)},
        {"3-phase defective", three_phase_defective()}}) {
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 8);
    for (bool is_max : {true, false}) {
      const ExtremaLaw law = extrema_law(model, fund, tables, is_max);
      const Vector total = law.captured_mass + law.tail_bound;
      const std::string what = name + (is_max ? " max" : " min");
      c.expect(total.minCoeff() >= 1.0 - 1e-6, what + " mass above 1 - 1e-6");
      c.expect(total.maxCoeff() <= 1.0 + 1e-9, what + " mass below 1 + 1e-9");
    }
  }
  CHECK(report(c, start));
}

TEST_CASE("criterion 5: MMBM closed forms, identities and Euler MC") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"5 MMBM"};

  // scalar closed forms
  {
    const MmbmModel model = scalar_mmbm(-1.0, 2.0, 1.0);
    const Fundamentals fund = compute_fundamentals(model, {});
    c.expect_le(std::abs(fund.G(0, 0) - (1.0 - std::sqrt(5.0)) / 2.0), 1e-10, "scalar G root");
    c.expect_le(std::abs(fund.H(0, 0) - 1.0 / std::sqrt(5.0)), 1e-10, "scalar H");

    const MmbmModel brownian = scalar_mmbm(-1.0, 2.0, 0.0);
    const MmbmFluct fluct = build_mmbm_fluct(brownian, {});
    for (auto [a, b] : {std::pair<double, double>{1.0, 1.0}, {0.5, 2.0}}) {
      const double expected = (1.0 - std::exp(-b)) / (1.0 - std::exp(-(a + b)));
      c.expect_le(std::abs(mmbm_exit(fluct, a, b)(0, 0) - expected), 1e-10, "Brownian exit law");
    }
  }

  // creeping-limit identity on the 2-phase all-Brownian model
  {
    const MmbmFluct fluct = build_mmbm_fluct(two_phase_mmbm(), {1e-13, 2'000'000});
    for (double x : {0.01, 1.0, 10.0}) {
      c.expect_le(mmbm_creeping_identity(fluct, x), 1e-8,
                  "creeping identity at x = " + std::to_string(x));
    }
    c.expect_le(mmbm_transform_check(fluct).residual, 1e-6, "quadrature transform");
  }

  // Euler Monte Carlo exits
  {
    SimConfig cfg;
    cfg.n_paths = 100'000;
    cfg.seed = 20240322;
    cfg.euler_dt = 1e-3;

    const MmbmModel brownian = scalar_mmbm(-1.0, 2.0, 0.0);
    SimTarget exit_target{SimTarget::Kind::MmbmExit};
    exit_target.xa = 1.0;
    exit_target.xb = 1.0;
    const SimEstimate scalar_est = sim_mmbm(brownian, exit_target, cfg);
    const double expected = (1.0 - std::exp(-1.0)) / (1.0 - std::exp(-2.0));
    c.expect_le(std::abs(scalar_est.mean(0, 0) - expected),
                std::max(4.0 * scalar_est.std_error(0, 0), 5e-3), "scalar Euler MC exit");

    const MmbmModel model = two_phase_mmbm();
    const MmbmFluct fluct = build_mmbm_fluct(model, {});
    SimTarget pair_target{SimTarget::Kind::MmbmExit};
    pair_target.xa = 0.7;
    pair_target.xb = 1.1;
    const SimEstimate pair_est = sim_mmbm(model, pair_target, cfg);
    const Matrix analytic = mmbm_exit(fluct, 0.7, 1.1);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        c.expect_le(std::abs(analytic(i, j) - pair_est.mean(i, j)),
                    std::max(4.0 * pair_est.std_error(i, j), 5e-3),
                    "2-phase Euler MC exit entry");
      }
    }
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect_le(seconds, 120.0, "runtime under 2 min");
  CHECK(report(c, start));
}

TEST_CASE("criterion 6: killing and the bilateral transform") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"6 transform domains under killing"};

  double previous_h = std::numeric_limits<double>::infinity();
  for (double q : {0.5, 1.0, 2.0}) {
    const LatticeModel model = bd(1, 2, q);
    const Fundamentals fund = compute_fundamentals(model, {});
    const auto z = find_bilateral_z(model, fund);
    c.expect(z.has_value(), "killed BD(1,2) admits a bilateral z");
    if (z) {
      const TransformCheck check = check_H_transform_bilateral(model, fund, *z);
      c.expect(check.ok(), "bilateral transform passes at z = " + std::to_string(*z));
    }
    c.expect(fund.H(0, 0) <= previous_h + 1e-12, "H(0;q) nonincreasing in q");
    previous_h = fund.H(0, 0);
  }

  const LatticeModel free_model = bd(1, 2);
  const Fundamentals free_fund = compute_fundamentals(free_model, {});
  c.expect(!find_bilateral_z(free_model, free_fund).has_value(),
           "free BD(1,2) has no valid z in (0,1)");
  const TransformCheck unilateral = check_H_transform_unilateral(free_model, free_fund, 0.5);
  c.expect(unilateral.ok(), "unilateral transform passes at z = 0.5");

  CHECK(report(c, start));
}

TEST_CASE("criterion 7: decay diagnostic") {
  const auto start = std::chrono::steady_clock::now();
  Criterion c{"7 decay diagnostic"};

  const LatticeModel model = bd(1, 2);
  const Fundamentals fund = compute_fundamentals(model, {});
  const DecayDiagnostic diag = decay_diagnostic(model, fund, 40);
  c.expect(diag.region_found, "transform region exists");
  c.expect(diag.phi_estimate >= 1.999 && diag.phi_estimate <= 2.001,
           "phi within [1.999, 2.001], got " + std::to_string(diag.phi_estimate));
  c.expect_le(std::abs(diag.xi_star_estimate * diag.phi_estimate - 1.0), 0.01,
              "|xi* phi - 1| below 0.01");
  CHECK(report(c, start));
}
