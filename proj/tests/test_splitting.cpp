#include <doctest.h>

#include <cmath>

#include "dalab/rng.hpp"
#include "dalab/splitting.hpp"
#include "test_fixtures.hpp"

using namespace dalab;
using dalab::testing::built_example_100;
using dalab::testing::field_of;
using dalab::testing::mild_twist_map;

TEST_CASE("linear cones: no violations, margin grows with n") {
  double prev_margin = -1;
  for (int64_t n : {10, 100, 1000}) {
    DiffeoSpec f = linear_diffeo(family_inverse(n));
    LinearSpectrum s = *f.base_spectrum;
    ConeReport rep = cone_invariance_check(f, ConeSpec::from_spectrum(s, 0.1, ConeKind::u), 500);
    CHECK(rep.violations == 0);
    CHECK(rep.min_margin > prev_margin);
    prev_margin = rep.min_margin;
    for (ConeKind k : {ConeKind::s, ConeKind::cu, ConeKind::cs}) {
      for (double theta : {0.05, 0.1, 0.5}) {
        ConeReport r = cone_invariance_check(f, ConeSpec::from_spectrum(s, theta, k), 200);
        CHECK(r.violations == 0);
        CHECK(r.min_margin > 0);
      }
    }
  }
}

TEST_CASE("built example passes all four cones at theta 0.1") {
  const auto& ex = built_example_100();
  for (const auto& rep : ex.cones) {
    CHECK(rep.violations == 0);
    CHECK(rep.min_margin > 0);
  }
  // strict nesting: positive margin means the image cone sits strictly inside
  CHECK(ex.cones[0].min_margin > 0.05);
}

TEST_CASE("refined splitting of the linear model equals the eigenbasis") {
  DiffeoSpec f = linear_diffeo(family_inverse(100));
  LinearSpectrum s = *f.base_spectrum;
  HaltonSampler qmc(4, "refine-linear");
  for (int i = 0; i < 50; ++i) {
    SplittingFrame fr = refine_frame(f, s, qmc.point(i), 60);
    CHECK(norm(fr.e_u - s.e_u) < 1e-10);
    CHECK(norm(fr.e_c - s.e_c) < 1e-10);
    CHECK(norm(fr.e_s - s.e_s) < 1e-10);
  }
}

TEST_CASE("refined splitting of the built example is certified") {
  const auto& ex = built_example_100();
  HaltonSampler qmc(11, "refine-built");
  std::vector<TorusPoint> seeds;
  for (int i = 0; i < 48; ++i) seeds.push_back({qmc.point(i)});
  SplittingField S = refine_splitting(ex.map, ex.spectrum, seeds, 60, 1e-6);
  CHECK(S.max_residual() < 1e-6);
  CHECK(S.min_pairwise_angle() > 0.5); // transversality, radians

  SUBCASE("doubled-tail oracle agrees with the short tail") {
    for (int i = 0; i < 12; ++i) {
      Vec3 x = qmc.point(100 + i);
      SplittingFrame a = refine_frame(ex.map, ex.spectrum, x, 24);
      SplittingFrame b = refine_frame(ex.map, ex.spectrum, x, 48);
      CHECK(norm(a.e_u - b.e_u) < 1e-10);
      CHECK(norm(a.e_c - b.e_c) < 1e-10);
      CHECK(norm(a.e_s - b.e_s) < 1e-10);
    }
  }
}

TEST_CASE("computed fields converge to the linear eigenbasis as n grows") {
  // mild equal-size perturbation at each n; field-to-eigenvector angles at
  // matched sample points must shrink
  HaltonSampler qmc(12, "angle-convergence");
  double prev_u = 10, prev_c = 10, prev_s = 10;
  for (int64_t n : {10, 100, 1000}) {
    DiffeoSpec f = mild_twist_map(n, 0.05);
    LinearSpectrum s = *f.base_spectrum;
    double au = 0, ac = 0, as = 0;
    for (int i = 0; i < 10; ++i) {
      SplittingFrame fr = refine_frame(f, s, qmc.point(i), 40);
      au = std::max(au, line_angle(fr.e_u, s.e_u));
      ac = std::max(ac, line_angle(fr.e_c, s.e_c));
      as = std::max(as, line_angle(fr.e_s, s.e_s));
    }
    CHECK(au < prev_u);
    CHECK(ac < prev_c);
    CHECK(as < prev_s);
    prev_u = au;
    prev_c = ac;
    prev_s = as;
  }
}

TEST_CASE("absolute partial hyperbolicity gaps") {
  SUBCASE("linear gaps equal the spectral gaps") {
    DiffeoSpec f = linear_diffeo(family_inverse(100));
    LinearSpectrum s = *f.base_spectrum;
    AbsolutePhReport rep = absolute_ph_check(f, field_of(f), 500);
    CHECK(rep.min_gap_sc == doctest::Approx(s.beta_c - s.beta_s).epsilon(1e-9));
    CHECK(rep.min_gap_cu == doctest::Approx(s.beta_u - s.beta_c).epsilon(1e-9));
    CHECK(rep.pass);
  }
  SUBCASE("built example: positive gaps across base points") {
    const auto& ex = built_example_100();
    AbsolutePhReport rep = absolute_ph_check(ex.map, field_of(ex.map), 10000);
    CHECK(rep.min_gap_sc > 0);
    CHECK(rep.min_gap_cu > 0);
    CHECK(rep.expansion_min > 1);
    CHECK(rep.contraction_max < 1);
    CHECK(rep.pass);
    // uniform contraction bound of the built family: 2/n plus the measured
    // perturbation size
    double c1_distance = 0;
    HaltonSampler qmc(13, "c1-distance");
    Mat3 B = family_inverse(100).to_real();
    for (int i = 0; i < 2000; ++i) {
      Vec3 x = qmc.point(i);
      c1_distance = std::max(c1_distance, (ex.map.derivative(x) - B).norm_inf());
    }
    CHECK(rep.contraction_max < 2.0 / 100 + c1_distance);
  }
}
