#include <doctest.h>

#include <cmath>

#include "dalab/errors.hpp"
#include "dalab/perturbation.hpp"
#include "dalab/rng.hpp"
#include "oracles.hpp"
#include "test_fixtures.hpp"

using namespace dalab;
using dalab::testing::built_example_100;
using dalab::testing::unit_cert;

TEST_CASE("zero amplitude is the identity perturbation") {
  DiffeoSpec f = linear_diffeo(family_inverse(100));
  BumpSpec b;
  b.center = {{0.5, 0.5, 0.5}};
  b.amplitude = 0.0;
  DiffeoSpec g = center_boost(f, b, unit_cert());
  HaltonSampler qmc(1, "zero-amp");
  for (int i = 0; i < 100; ++i) {
    Vec3 x = qmc.point(i);
    CHECK(norm_inf(g.lift(x) - f.lift(x)) == 0); // bit-identical
  }
}

TEST_CASE("twist layers have unit Jacobian to machine precision") {
  const auto& ex = built_example_100();
  HaltonSampler qmc(2, "unit-jac");
  double worst = 0;
  for (int i = 0; i < 100000; ++i)
    worst = std::max(worst, std::fabs(ex.boosted.derivative(qmc.point(i)).det() - 1.0));
  CHECK(worst <= 1e-12);

  // analytic Jacobian agrees with central differences
  for (int i = 0; i < 100; ++i) {
    Vec3 x = qmc.point(7 * i);
    Mat3 Ja = ex.boosted.derivative(x);
    Mat3 Jn = oracle::numeric_jacobian(ex.boosted.lift, x);
    CHECK((Ja - Jn).norm_inf() < 1e-5 * Ja.norm_inf());
  }
}

TEST_CASE("boost raises the center integral inside the prescribed window") {
  const auto& ex = built_example_100();
  double lo = ex.spectrum.lambda_c;
  double hi = std::log(1 + 2 * ex.spectrum.alpha_n);
  CHECK(ex.integral_after_boost.mean - ex.integral_after_boost.ci95 >
        ex.integral_before_boost.mean + ex.integral_before_boost.ci95);
  CHECK(ex.integral_after_boost.mean - ex.integral_after_boost.ci95 > lo);
  CHECK(ex.integral_after_boost.mean + ex.integral_after_boost.ci95 < hi);
}

TEST_CASE("oversized amplitude is rejected with the failing cone sample") {
  DiffeoSpec f = linear_diffeo(family_inverse(100));
  BumpSpec b;
  b.center = {{0.5, 0.5, 0.5}};
  b.amplitude = 1.3;
  b.aspect = 1.0;
  BoostCertification cert = unit_cert();
  cert.cone_samples = 4000;
  try {
    center_boost(f, b, cert);
    FAIL("expected rejected_perturbation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::rejected_perturbation);
    CHECK(std::string(e.what()).find("cone") != std::string::npos);
  }
}

TEST_CASE("cone violations of an uncertified oversized twist sit inside its support") {
  DiffeoSpec f = dalab::testing::mild_twist_map(100, 1.3, 1.0); // bypasses certification
  ConeSpec cone = ConeSpec::from_spectrum(*f.base_spectrum, 0.1, ConeKind::cs);
  ConeReport rep = cone_invariance_check(f, cone, 20000);
  CHECK(rep.violations > 0);
  double du = wrap_half(rep.worst_point.v[0] - 0.5);
  double dc = wrap_half(rep.worst_point.v[1] - 0.5);
  CHECK(std::sqrt(du * du + dc * dc) < 0.15 + 1e-9);
}

TEST_CASE("malformed bump geometry is rejected") {
  BumpSpec b;
  b.radius = 0.3;
  b.aspect = 0.42; // major semi-axis 0.71 wraps around
  CHECK_THROWS_AS(b.validate(), Error);
  b.radius = 0.6;
  b.aspect = 1.0;
  CHECK_THROWS_AS(b.validate(), Error);
  b.radius = 0.2;
  b.plane = {1, 1};
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("neighborhood schedule certifies nested return times") {
  const auto& ex = built_example_100();
  const NeighborhoodSchedule& sch = ex.schedule;
  CHECK(sch.certified_depth >= 4);
  for (size_t j = 0; j + 1 < sch.radii.size(); ++j) CHECK(sch.radii[j + 1] < sch.radii[j]);
  for (size_t j = 0; j < sch.radii.size(); ++j) CHECK(2 * sch.radii[j] < 1.0 / (j + 1));

  // independent brute-force verification of the return-time property
  HaltonSampler qmc(77, "schedule-oracle");
  Vec3 p = sch.fixed_point.v;
  for (int level = 0; level + 1 <= sch.certified_depth && level < 3; ++level) {
    double eps_j = sch.radii[level], eps_next = sch.radii[level + 1];
    for (int i = 0; i < 2000; ++i) {
      Vec3 x = qmc.point(i);
      if (torus_dist(x, p) < eps_j) continue;
      Vec3 fwd = x, bwd = x;
      for (int k = 1; k <= level + 1; ++k) {
        fwd = ex.boosted.lift(fwd);
        bwd = ex.boosted.lift_inverse(bwd);
        CHECK(torus_dist(fwd, p) >= eps_next);
        CHECK(torus_dist(bwd, p) >= eps_next);
      }
    }
  }

  SUBCASE("level zero is the user radius, certified trivially") {
    DiffeoSpec f = linear_diffeo(family_inverse(100));
    NeighborhoodSchedule s0 = neighborhood_schedule(f, {{0, 0, 0}}, 0, 100, 0.07);
    CHECK(s0.radii.size() == 1);
    CHECK(s0.radii[0] == 0.07);
    CHECK(s0.certified_depth == 0);
  }
  SUBCASE("non-fixed center is rejected") {
    DiffeoSpec f = linear_diffeo(family_inverse(100));
    CHECK_THROWS_AS(neighborhood_schedule(f, {{0.3, 0.1, 0.2}}, 2, 100, 0.05), Error);
  }
}

TEST_CASE("surgery: derivative prescription at the fixed point") {
  const auto& ex = built_example_100();
  Vec3 p = ex.surgery.fixed_point.v;
  Mat3 Dp = ex.map.derivative(p);
  const LinearSpectrum& s = ex.spectrum;

  // center eigenvalue 1 - alpha, unstable restriction unchanged, determinant 1
  CHECK(norm(Dp * s.e_c - (1 - s.alpha_n) * s.e_c) < 1e-9);
  CHECK(norm(Dp * s.e_u - s.beta_u * s.e_u) < 1e-9 * s.beta_u);
  CHECK(std::fabs(ex.surgery.target_derivative.det() - 1.0) <= 1e-12);
  CHECK((Dp - ex.surgery.target_derivative).norm_inf() < 1e-9 * Dp.norm_inf());

  // exactly two contracting directions
  double su = norm(Dp * s.e_u), sc = norm(Dp * s.e_c), ss = norm(Dp * s.e_s);
  CHECK(((su < 1) + (sc < 1) + (ss < 1)) == 2);

  // the fixed point is fixed
  CHECK(torus_dist(ex.map.lift(p), p) < 1e-12);
}

TEST_CASE("surgery is bit-exact outside the blend ball") {
  const auto& ex = built_example_100();
  Vec3 p = ex.surgery.fixed_point.v;
  double radius = ex.surgery.blend_radius;
  HaltonSampler qmc(5, "surgery-outside");
  long checked = 0;
  for (int i = 0; checked < 100000; ++i) {
    Vec3 x = qmc.point(i);
    if (torus_dist(x, p) < radius) continue;
    ++checked;
    CHECK(norm_inf(ex.map.lift(x) - ex.boosted.lift(x)) == 0);
  }
}

TEST_CASE("no-op surgery and idempotence") {
  const auto& ex = built_example_100();
  BoostCertification cert = unit_cert();
  cert.cone_samples = 2000;

  SUBCASE("target equal to the current derivative is a no-op") {
    SurgerySpec noop = ex.surgery;
    noop.target_derivative = ex.boosted.derivative(ex.surgery.fixed_point.v);
    DiffeoSpec g = fixed_point_surgery(ex.boosted, noop, ex.schedule, 3, cert);
    HaltonSampler qmc(6, "noop");
    for (int i = 0; i < 300; ++i) {
      Vec3 x = 0.1 * qmc.point(i); // includes the ball
      CHECK(norm_inf(g.lift(x) - ex.boosted.lift(x)) == 0);
    }
  }

  SUBCASE("applying the same surgery twice equals applying it once") {
    DiffeoSpec g2 = fixed_point_surgery(ex.map, ex.surgery, ex.schedule, 3, cert);
    HaltonSampler qmc(8, "idem");
    for (int i = 0; i < 300; ++i) {
      Vec3 x = 0.05 * qmc.point(i);
      CHECK(norm_inf(g2.lift(x) - ex.map.lift(x)) == 0);
    }
  }

  SUBCASE("preconditions: depth and fixed point") {
    CHECK_THROWS_AS(
        fixed_point_surgery(ex.boosted, ex.surgery, ex.schedule,
                            ex.schedule.certified_depth + 1, cert),
        Error);
    SurgerySpec bad = ex.surgery;
    bad.fixed_point = {{0.37, 0.11, 0.83}};
    CHECK_THROWS_AS(fixed_point_surgery(ex.boosted, bad, ex.schedule, 1, cert), Error);
  }
}

TEST_CASE("built example certification summary") {
  const auto& ex = built_example_100();
  CHECK(ex.volume_deviation <= 1e-6);
  CHECK(ex.equivariance <= 1e-9);
  for (const auto& c : ex.cones) {
    CHECK(c.violations == 0);
    CHECK(c.min_margin > 0);
  }
  // the shrinking blend ball barely moves the integral
  CHECK(std::fabs(ex.integral_after_surgery.mean - ex.integral_after_boost.mean) <
        10 * ex.integral_after_boost.ci95);
}

TEST_CASE("stage identity propagates from failed builds") {
  BoostParams boost;
  boost.amplitude = 1.4; // cone check cannot survive this
  SurgeryParams surgery;
  BoostCertification cert = unit_cert();
  cert.cone_samples = 2000;
  try {
    build_da_example(100, 1, boost, surgery, cert);
    FAIL("expected a rejected stage");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("center_boost") != std::string::npos);
  }
  CHECK_THROWS_AS(build_da_example(3, 1, BoostParams{}, SurgeryParams{}, cert), Error);
}
