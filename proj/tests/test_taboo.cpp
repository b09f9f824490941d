#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mapkit/taboo.hpp"
#include "mapkit/verify.hpp"

using namespace mapkit;
using namespace mapkit::testing;

TEST_CASE("BD(1,2) taboo machinery in closed form") {
  const LatticeModel model = bd(1, 2);
  const Fundamentals fund = compute_fundamentals(model, {});
  const TabooTables tables = build_taboo_tables(model, fund, 12);

  SUBCASE("R_tilde is the scalar R") {
    CHECK(tables.r_tilde(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r_tilde_residual(model, tables.r_tilde) < 1e-11);
  }
  SUBCASE("overshoot matrices") {
    CHECK(tables.overshoot[0](0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(tables.overshoot[1](0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }
  SUBCASE("Phi(m) = 2^{-m} / 2") {
    for (int m = 0; m <= 6; ++m) {
      CHECK(tables.phi[m](0, 0) == doctest::Approx(0.5 * std::pow(2.0, -m)).epsilon(1e-9));
    }
  }
  SUBCASE("Xi(m) = 1 - 2^{-m}, and Xi(1) = Phi(0)") {
    check_close(tables.xi[1], tables.phi[0], 0.0);
    for (int m = 1; m <= 8; ++m) {
      CHECK(tables.xi[m](0, 0) == doctest::Approx(1.0 - std::pow(2.0, -m)).epsilon(1e-9));
    }
  }
  SUBCASE("Theta(k) = 1 - 2^{-k}") {
    REQUIRE(tables.theta_available);
    CHECK(tables.theta_route == "occupation");
    for (int k = 1; k <= 8; ++k) {
      CHECK(tables.theta[k](0, 0) == doctest::Approx(1.0 - std::pow(2.0, -k)).epsilon(1e-9));
    }
  }
}

TEST_CASE("R_tilde conjugation on BD(2,1)") {
  const LatticeModel model = bd(2, 1);
  const Fundamentals fund = compute_fundamentals(model, {});
  const Matrix rt = r_tilde(model, fund.R);
  CHECK(rt(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r_tilde_residual(model, rt) < 1e-11);
}

TEST_CASE("overshoot mass leaks under killing and under downward drift") {
  SUBCASE("BD(1,2): total overshoot mass is 2/3") {
    // from level 0 the chain jumps up w.p. 1/3 and returns from -1 w.p. 1/2
    const LatticeModel model = bd(1, 2);
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 2);
    const double mass = tables.overshoot[0](0, 0) + tables.overshoot[1](0, 0);
    CHECK(mass == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  }
  SUBCASE("defective model: strictly substochastic") {
    const LatticeModel model = three_phase_defective();
    const Fundamentals fund = compute_fundamentals(model, {});
    Matrix total = Matrix::Zero(3, 3);
    for (const Matrix& a : fund.overshoot) total += a;
    CHECK(total.rowwise().sum().maxCoeff() < 1.0);
  }
}

TEST_CASE("pure death chain: positive levels are unreachable") {
  const LatticeModel model = pure_death(1.0, 1.0);
  const Fundamentals fund = compute_fundamentals(model, {});
  const TabooTables tables = build_taboo_tables(model, fund, 5);
  CHECK(tables.phi[0](0, 0) == doctest::Approx(0.5));  // 1 / (rate + kill)
  for (int m = 1; m <= 5; ++m) CHECK(tables.phi[m](0, 0) == doctest::Approx(0.0));
  // Theta(k) = expected time at 0 before death or tau_{-k}: never returns to 0
  for (int k = 1; k <= 5; ++k) CHECK(tables.theta[k](0, 0) == doctest::Approx(0.5));
}

TEST_CASE("telescoping identity holds against fresh recomputation") {
  for (uint64_t seed : {31ull, 32ull}) {
    const LatticeModel model = random_lattice_model(seed);
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 10);
    Matrix r_pow = Matrix::Identity(model.phases(), model.phases());
    Matrix fresh = Matrix::Zero(model.phases(), model.phases());
    for (int m = 1; m <= 10; ++m) {
      fresh += tables.phi[m - 1] * r_pow;
      check_close(tables.xi[m], fresh, 1e-10);
      r_pow = r_pow * fund.R;
    }
  }
}

TEST_CASE("Xi equals its occupation-time representations when transient") {
  for (uint64_t seed : {33ull, 34ull, 35ull}) {
    const LatticeModel model = random_lattice_model(seed);
    const Fundamentals fund = compute_fundamentals(model, {});
    if (!fund.H_finite) continue;
    const TabooTables tables = build_taboo_tables(model, fund, 6);
    for (long m = 1; m <= 5; ++m) {
      const Matrix hit = hitting_matrix(model, fund, m);
      Matrix g_pow = Matrix::Identity(model.phases(), model.phases());
      Matrix r_pow = g_pow;
      for (long i = 0; i < m; ++i) {
        g_pow = g_pow * fund.G;
        r_pow = r_pow * fund.R;
      }
      check_close(tables.xi[m], fund.H - hit * g_pow * fund.H, 1e-9);
      check_close(tables.xi[m], fund.H - hit * fund.H * r_pow, 1e-9);
    }
  }
}

TEST_CASE("Theta routes agree where both are defined") {
  for (uint64_t seed : {36ull, 37ull, 41ull}) {
    const LatticeModel model = random_lattice_model(seed);
    if (!is_invertible(model.block(-1))) continue;
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 6);
    if (!tables.theta_available) continue;
    Matrix g_pow = Matrix::Identity(model.phases(), model.phases());
    Matrix r_pow = g_pow;
    for (long k = 1; k <= 5; ++k) {
      g_pow = g_pow * fund.G;
      r_pow = r_pow * fund.R;
      check_close(tables.theta[k] * r_pow, g_pow * tables.xi[k], 1e-9);
    }
  }
}

TEST_CASE("Theta needs either a transient model or a nonsingular A_{-1}") {
  SUBCASE("rank-1 A_{-1} with drift uses the occupation route") {
    const LatticeModel model = mph1(1.0, 3.0);  // mu = 1 - 3/2 < 0, transient
    const Fundamentals fund = compute_fundamentals(model, {});
    REQUIRE(fund.H_finite);
    std::string route;
    (void)theta_matrices(model, fund, build_taboo_tables(model, fund, 4).xi, 4, &route);
    CHECK(route == "occupation");
  }
  SUBCASE("null recurrent with nonsingular A_{-1} uses the scale route") {
    const LatticeModel model = bd(1, 1);
    const Fundamentals fund = compute_fundamentals(model, {1e-10, 1'000'000});
    const TabooTables tables = build_taboo_tables(model, fund, 4);
    REQUIRE(tables.theta_available);
    CHECK(tables.theta_route == "scale");
  }
  SUBCASE("null recurrent with rank-1 A_{-1} has no route") {
    const LatticeModel model = mph1(1.5, 3.0);  // mu = 1.5 - 1.5 = 0
    REQUIRE(drift_and_pi(model).tag == RegimeTag::C1ZeroDrift);
    const Fundamentals fund = compute_fundamentals(model, {1e-9, 1'000'000});
    const TabooTables tables = build_taboo_tables(model, fund, 4);
    CHECK_FALSE(tables.theta_available);
    CHECK_THROWS_WITH_AS((void)theta_matrices(model, fund, tables.xi, 4, nullptr),
                         doctest::Contains("NullRecurrentAndSingularA"), Error);
  }
}

TEST_CASE("taboo occupation against the brute-force strip oracle") {
  // Xi(m) is the strip occupation E[L(0, tau_{-inf} /\ tau_m^up)] with the
  // lower boundary pushed far down
  const LatticeModel model = three_phase_defective();
  const Fundamentals fund = compute_fundamentals(model, {});
  const TabooTables tables = build_taboo_tables(model, fund, 4);
  for (long m = 1; m <= 3; ++m) {
    const Matrix oracle = brute_strip_occupation(model, 0, 40, m);
    check_close(tables.xi[m], oracle, 1e-10);
  }
  // Phi(m): time at level m before upcrossing m+1, same oracle shifted
  for (long m = 1; m <= 3; ++m) {
    const Matrix oracle = brute_strip_occupation(model, m, 40, m + 1);
    check_close(tables.phi[m], oracle, 1e-10);
  }
}

TEST_CASE("running-maximum total matches F(1)^{-1}(R - I) for defective models") {
  const LatticeModel model = three_phase_defective();
  const Fundamentals fund = compute_fundamentals(model, {});
  const TabooTables tables = build_taboo_tables(model, fund, 160);
  Matrix sum = Matrix::Zero(3, 3);
  for (const Matrix& p : tables.phi) sum += p;
  const Matrix target = lu_inverse(model.F(1.0)) * (fund.R - Matrix::Identity(3, 3));
  check_close(sum, target, 1e-8);
}

TEST_CASE("Upsilon(z) transform at z = 0.3") {
  for (uint64_t seed : {42ull, 43ull}) {
    const LatticeModel model = random_lattice_model(seed);
    const Fundamentals fund = compute_fundamentals(model, {});
    const TabooTables tables = build_taboo_tables(model, fund, 40);
    const double z = 0.3;
    Matrix sum = Matrix::Zero(model.phases(), model.phases());
    double zk = 1.0;
    for (int m = 0; m <= 40; ++m) {
      sum += tables.phi[m] * zk;
      zk *= z;
    }
    const Matrix target =
        lu_inverse(model.F(z)) * (fund.R - z * Matrix::Identity(model.phases(), model.phases()));
    check_close(sum, target, 1e-6);
  }
}
