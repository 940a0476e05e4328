#include <doctest.h>

#include <cmath>

#include "dalab/lyapunov.hpp"
#include "dalab/rng.hpp"
#include "test_fixtures.hpp"

using namespace dalab;
using dalab::testing::built_example_100;
using dalab::testing::field_of;

TEST_CASE("linear exactness of the exponent estimators") {
  for (int64_t n : {10, 100}) {
    DiffeoSpec f = linear_diffeo(family_inverse(n));
    LinearSpectrum s = *f.base_spectrum;
    SplittingField S = field_of(f);
    HaltonSampler qmc(3, "lin-exact");
    for (int i = 0; i < 5; ++i) {
      TorusPoint x{qmc.point(i)};
      for (int horizon : {1, 7, 30}) {
        auto v = finite_time_exponents(f, S, x, horizon);
        CHECK(std::fabs(v[0] - s.lambda_s) < 1e-10);
        CHECK(std::fabs(v[1] - s.lambda_c) < 1e-10);
        CHECK(std::fabs(v[2] - s.lambda_u) < 1e-10);
      }
      // orbit QR estimator as the cross-module oracle
      auto q = qr_exponents(f, s, x, 50);
      CHECK(std::fabs(q[0] - s.lambda_s) < 1e-8);
      CHECK(std::fabs(q[1] - s.lambda_c) < 1e-8);
      CHECK(std::fabs(q[2] - s.lambda_u) < 1e-8);
    }
  }
}

TEST_CASE("center exponent at the surgered fixed point is log(1 - alpha)") {
  const auto& ex = built_example_100();
  SplittingField S = field_of(ex.map);
  for (int horizon : {1, 5, 50}) {
    ExponentEstimate e = finite_time_exponent(ex.map, S, ex.surgery.fixed_point, horizon, 'c');
    CHECK(e.value == doctest::Approx(std::log(1 - ex.spectrum.alpha_n)).epsilon(1e-9));
    CHECK(e.value < 0);
  }
}

TEST_CASE("finite-time fluctuations shrink like the inverse square root") {
  const auto& ex = built_example_100();
  SplittingField S = field_of(ex.map, 12);
  HaltonSampler qmc(9, "fluct");
  auto sd_at = [&](int horizon) {
    const int m = 60;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < m; ++i) {
      auto v = finite_time_exponents(ex.map, S, {qmc.point(i)}, horizon);
      s1 += v[1];
      s2 += v[1] * v[1];
    }
    double mean = s1 / m;
    return std::sqrt(std::max(0.0, s2 / m - mean * mean));
  };
  double sd100 = sd_at(100), sd1000 = sd_at(1000);
  double ratio = sd1000 / sd100; // expect ~ sqrt(1/10) = 0.316
  CHECK(ratio < 0.6);
  CHECK(ratio > 0.15);
}

TEST_CASE("mc center integral on the linear model") {
  DiffeoSpec f = linear_diffeo(family_inverse(100));
  LinearSpectrum s = *f.base_spectrum;
  SplittingField S = field_of(f);
  McResult r = mc_center_integral(f, S, 4000, 7);
  CHECK(std::fabs(r.mean - s.lambda_c) < 1e-10); // integrand is constant
  SUBCASE("interval width scales like the inverse square root of the budget") {
    const auto& ex = built_example_100();
    SplittingField Sb = field_of(ex.map, 12);
    McResult a = mc_center_integral(ex.map, Sb, 2000, 7);
    McResult b = mc_center_integral(ex.map, Sb, 8000, 7);
    CHECK(b.ci95 / a.ci95 == doctest::Approx(0.5).epsilon(0.35));
  }
}

TEST_CASE("level sets of the linear model collapse at the exact exponent") {
  DiffeoSpec f = linear_diffeo(family_inverse(100));
  LinearSpectrum s = *f.base_spectrum;
  SplittingField S = field_of(f);
  LevelSetEstimate below = level_set_fraction(f, S, 0.9 * s.lambda_c, 5, 50, 400, 7);
  CHECK(below.fraction == 1.0);
  LevelSetEstimate above = level_set_fraction(f, S, 1.1 * s.lambda_c, 5, 50, 400, 7);
  CHECK(above.fraction == 0.0);
}

TEST_CASE("level-set fraction of the built example is positive and stable") {
  const auto& ex = built_example_100();
  SplittingField S = field_of(ex.map, 12);
  double lam = ex.spectrum.lambda_c;
  LevelSetEstimate e200 = level_set_fraction(ex.map, S, lam, 20, 200, 250, 7);
  LevelSetEstimate e400 = level_set_fraction(ex.map, S, lam, 20, 400, 250, 7);
  LevelSetEstimate e800 = level_set_fraction(ex.map, S, lam, 20, 800, 250, 7);
  CHECK(e200.fraction > 0.5);
  CHECK(e400.fraction > 0.5);
  CHECK(e800.fraction > 0.5);
  CHECK(std::fabs(e400.fraction - e800.fraction) < 0.15);
}

TEST_CASE("sum rule with angle correction and exponent dominance") {
  const auto& ex = built_example_100();
  SplittingField S = field_of(ex.map);
  HaltonSampler qmc(10, "sum-rule");
  for (int i = 0; i < 8; ++i) {
    TorusPoint x{qmc.point(i)};
    const int n = 30;
    auto v = finite_time_exponents(ex.map, S, x, n);
    CHECK(v[0] < v[1]);
    CHECK(v[1] < v[2]);
    double logdet = 0;
    Vec3 p = x.v;
    for (int k = 0; k < n; ++k) {
      logdet += std::log(std::fabs(ex.map.derivative(p).det()));
      p = ex.map.lift(p);
    }
    double defect = std::fabs(v[0] + v[1] + v[2] - logdet / n);
    CHECK(defect <= sum_rule_angle_bound(S, x, n) + 1e-12);
  }
}

TEST_CASE("exponent csv rows") {
  CHECK(exponent_csv_header() == std::string("x0,x1,x2,horizon,sigma,value"));
  ExponentEstimate e;
  e.point = {{0.5, 0.25, 0.125}};
  e.horizon = 10;
  e.sigma = 'c';
  e.value = 0.5;
  CHECK(exponent_csv_row(e) == std::string("0.5,0.25,0.125,10,c,0.5"));
}
