#include "dalab/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dalab/errors.hpp"
#include "dalab/parallel.hpp"
#include "dalab/rng.hpp"

namespace dalab {

namespace {

SplittingField field_for(const DiffeoSpec& f, const LinearSpectrum& ref, int tail = 60) {
  SplittingField S;
  S.map = f;
  S.reference = ref;
  S.tail = tail;
  return S;
}

const LinearSpectrum& require_base_spectrum(const DiffeoSpec& f, const char* who) {
  if (!f.base_spectrum)
    fail(Errc::precondition, std::string(who) + ": map carries no base linear spectrum");
  return *f.base_spectrum;
}

std::shared_ptr<const MapStack> require_stack(const DiffeoSpec& f, const char* who) {
  if (!f.stack) fail(Errc::precondition, std::string(who) + ": map is not stack-built");
  return f.stack;
}

void check_cones_or_reject(const DiffeoSpec& g, const LinearSpectrum& ref,
                           const BoostCertification& cert, const char* stage,
                           std::array<ConeReport, 4>* out = nullptr) {
  auto reports = cone_invariance_check_all(g, ref, cert.theta, cert.cone_samples, 16,
                                           cert.threads);
  const char* names[4] = {"u", "s", "cu", "cs"};
  for (int i = 0; i < 4; ++i) {
    if (reports[i].violations > 0) {
      std::ostringstream os;
      os << stage << ": cone " << names[i] << " lost invariance at theta=" << cert.theta
         << " (violations=" << reports[i].violations << ", worst margin "
         << reports[i].min_margin << " at [" << reports[i].worst_point.v[0] << ","
         << reports[i].worst_point.v[1] << "," << reports[i].worst_point.v[2] << "])";
      fail(Errc::rejected_perturbation, os.str());
    }
  }
  if (out) *out = reports;
}

} // namespace

void BumpSpec::validate() const {
  if (!(radius > 0 && radius < 0.5)) fail(Errc::precondition, "BumpSpec: radius must be in (0, 1/2)");
  if (!(aspect > 0 && aspect <= 1)) fail(Errc::precondition, "BumpSpec: aspect must be in (0, 1]");
  if (radius / aspect >= 0.5)
    fail(Errc::precondition, "BumpSpec: support semi-axis r/aspect reaches the injectivity radius");
  if (!(profile_plateau > 0 && profile_plateau < 1))
    fail(Errc::precondition, "BumpSpec: plateau fraction must be in (0, 1)");
  if (plane[0] == plane[1] || plane[0] < 0 || plane[0] > 2 || plane[1] < 0 || plane[1] > 2)
    fail(Errc::precondition, "BumpSpec: plane must be two distinct axes");
}

DiffeoSpec center_boost(const DiffeoSpec& f, const BumpSpec& b, const BoostCertification& cert,
                        McResult* before_io, McResult* after_io) {
  b.validate();
  if (b.amplitude == 0.0) return f;
  const LinearSpectrum& ref = require_base_spectrum(f, "center_boost");
  auto stack = require_stack(f, "center_boost");

  TwistLayer twist;
  twist.axis_u = b.plane[0];
  twist.axis_c = b.plane[1];
  twist.center_u = b.center.v[b.plane[0]];
  twist.center_c = b.center.v[b.plane[1]];
  twist.radius = b.radius;
  twist.aspect = b.aspect;
  twist.angle = b.amplitude;
  twist.plateau = b.profile_plateau;

  // support must stay clear of any surgery ball already on the stack
  for (const auto& layer : stack->layers) {
    if (const auto* sq = std::get_if<SqueezeLayer>(&layer)) {
      double du = wrap_half(twist.center_u - sq->fixed_point[twist.axis_u]);
      double dc = wrap_half(twist.center_c - sq->fixed_point[twist.axis_c]);
      double clearance = std::sqrt(du * du + dc * dc) - twist.major_semi_axis() - sq->radius;
      if (clearance <= 0)
        fail(Errc::precondition, "center_boost: bump support intersects a surgery region");
    }
  }

  auto next = std::make_shared<MapStack>(*stack);
  next->layers.insert(next->layers.begin(), twist);
  DiffeoSpec g = stack_diffeo(next, f.base_spectrum, f.fixed_point);

  check_cones_or_reject(g, ref, cert, "center_boost");

  McResult before;
  if (before_io && before_io->budget == cert.mc_budget) {
    before = *before_io;
  } else {
    before = mc_center_integral(f, field_for(f, ref, cert.tail), cert.mc_budget, cert.seed,
                                cert.threads);
  }
  McResult after = mc_center_integral(g, field_for(g, ref, cert.tail), cert.mc_budget, cert.seed,
                                      cert.threads);
  if (!(after.mean - after.ci95 > before.mean + before.ci95)) {
    std::ostringstream os;
    os << "center_boost: integral did not increase with separated intervals ("
       << before.mean << " +- " << before.ci95 << " -> " << after.mean << " +- " << after.ci95
       << ")";
    fail(Errc::rejected_perturbation, os.str());
  }
  if (before_io) *before_io = before;
  if (after_io) *after_io = after;
  return g;
}

NeighborhoodSchedule neighborhood_schedule(const DiffeoSpec& f, const TorusPoint& p, int j_max,
                                           long orbit_budget, double eps0, uint64_t seed,
                                           int threads) {
  if (!(eps0 > 0 && eps0 < 0.5))
    fail(Errc::precondition, "neighborhood_schedule: eps0 must be in (0, 1/2)");
  if (torus_dist(f.lift(fract(p.v)), fract(p.v)) > 1e-9)
    fail(Errc::precondition, "neighborhood_schedule: p is not a fixed point");

  NeighborhoodSchedule sch;
  sch.fixed_point = p;
  sch.radii = {eps0};
  sch.certified_depth = 0; // level 0 is the user ball, certified trivially
  sch.min_return_distance = {eps0};

  // min distance of any <= (j+1)-step orbit point, both directions, to p over
  // seeds outside the current level ball
  auto orbit_clearance = [&](int level, uint64_t stream) {
    HaltonSampler qmc(seed + stream, "schedule");
    double eps_level = sch.radii[level];
    int steps = level + 2; // entry time must exceed level+1
    std::vector<double> mins(orbit_budget, 1e300);
    parallel_for(orbit_budget, threads, [&](int64_t i) {
      Vec3 x = qmc.point(i);
      if (torus_dist(x, p.v) < eps_level) return; // seed inside V_j: skipped
      double m = 1e300;
      Vec3 fwd = x, bwd = x;
      for (int k = 1; k <= steps; ++k) {
        fwd = f.lift(fwd);
        bwd = f.lift_inverse(bwd);
        m = std::min({m, torus_dist(fwd, p.v), torus_dist(bwd, p.v)});
      }
      mins[i] = m;
    });
    double m = 1e300;
    for (double v : mins) m = std::min(m, v);
    return m;
  };

  for (int j = 0; j < j_max; ++j) {
    double clearance = orbit_clearance(j, 2 * j);
    double cap = std::min(0.9 * sch.radii[j], 0.999 / (2.0 * (j + 2)));
    double candidate = std::min(0.9 * clearance, cap);
    bool certified = false;
    for (int attempt = 0; attempt < 4 && candidate > 0; ++attempt) {
      sch.radii.push_back(candidate);
      double verify = orbit_clearance(j, 2 * j + 1); // fresh seeds against the same level
      sch.radii.pop_back();
      if (verify > candidate) {
        certified = true;
        sch.radii.push_back(candidate);
        sch.min_return_distance.push_back(verify);
        sch.certified_depth = j + 1;
        break;
      }
      candidate *= 0.5;
    }
    if (!certified) break; // budget exhausted at this depth
  }
  return sch;
}

SurgerySpec make_surgery_spec(const LinearSpectrum& s, const TorusPoint& p) {
  SurgerySpec sp;
  sp.fixed_point = p;
  sp.matched_eigenspaces = {s.e_u, s.e_c, s.e_s};
  double center = 1.0 - s.alpha_n;
  double stable = 1.0 / (s.beta_u * center);
  Mat3 P = s.basis();
  Mat3 D{};
  D.m[0][0] = s.beta_u;
  D.m[1][1] = center;
  D.m[2][2] = stable;
  sp.target_derivative = P * D * P.inverse();
  return sp;
}

void SurgerySpec::validate() const {
  double d = target_derivative.det();
  if (std::fabs(d - 1.0) > 1e-12)
    fail(Errc::precondition, "SurgerySpec: target determinant " + std::to_string(d));
  for (const Vec3& e : matched_eigenspaces) {
    Vec3 img = target_derivative * e;
    double lambda = dot(img, e);
    if (norm(img - lambda * e) > 1e-9 * std::max(1.0, std::fabs(lambda)))
      fail(Errc::precondition, "SurgerySpec: target does not preserve the matched eigenspaces");
    if (lambda <= 0)
      fail(Errc::precondition, "SurgerySpec: target flips orientation on an eigenspace");
  }
}

DiffeoSpec fixed_point_surgery(const DiffeoSpec& f, const SurgerySpec& s,
                               const NeighborhoodSchedule& schedule, int j,
                               const BoostCertification& cert) {
  s.validate();
  const LinearSpectrum& ref = require_base_spectrum(f, "fixed_point_surgery");
  auto stack = require_stack(f, "fixed_point_surgery");
  if (j < 0 || j >= static_cast<int>(schedule.radii.size()) || j > schedule.certified_depth)
    fail(Errc::precondition, "fixed_point_surgery: level " + std::to_string(j) +
                                 " beyond certified depth " +
                                 std::to_string(schedule.certified_depth));
  Vec3 p = fract(s.fixed_point.v);
  if (torus_dist(f.lift(p), p) > 1e-9)
    fail(Errc::precondition, "fixed_point_surgery: fixed_point is not fixed by f");

  Mat3 Dp = f.derivative(p);
  const Vec3& eu = s.matched_eigenspaces[0];
  const Vec3& ec = s.matched_eigenspaces[1];
  double current_center = dot(Dp * ec, ec);
  double target_center = dot(s.target_derivative * ec, ec);
  double current_u = dot(Dp * eu, eu);
  double target_u = dot(s.target_derivative * eu, eu);
  if (std::fabs(current_u - target_u) > 1e-9 * std::fabs(current_u))
    fail(Errc::precondition, "fixed_point_surgery: target changes the unstable restriction");
  if (!(current_center > 0 && target_center > 0))
    fail(Errc::precondition, "fixed_point_surgery: center restriction must keep orientation");

  SqueezeLayer sq;
  sq.fixed_point = p;
  sq.radius = schedule.radii[j];
  sq.kappa = current_center / target_center;
  sq.steps = 16;
  sq.basis = Mat3::from_columns(s.matched_eigenspaces[0], s.matched_eigenspaces[1],
                                s.matched_eigenspaces[2]);
  sq.basis_inverse = sq.basis.inverse();
  sq.finalize();

  auto next = std::make_shared<MapStack>(*stack);
  next->layers.insert(next->layers.begin(), sq);
  DiffeoSpec g = stack_diffeo(next, f.base_spectrum, s.fixed_point);
  check_cones_or_reject(g, ref, cert, "fixed_point_surgery");
  return g;
}

BuiltExample build_da_example(int64_t n, int j, const BoostParams& boost,
                              const SurgeryParams& surgery, const BoostCertification& cert) {
  const char* stage = "spectrum";
  try {
    BuiltExample out;
    out.spectrum = spectral_triple(family_inverse(n));

    stage = "linear";
    DiffeoSpec f = linear_diffeo(family_inverse(n));
    out.integral_before_boost = mc_center_integral(f, field_for(f, out.spectrum, cert.tail),
                                                   cert.mc_budget, cert.seed, cert.threads);

    stage = "center_boost";
    McResult rolling = out.integral_before_boost;
    for (int i = 0; i < boost.count; ++i) {
      BumpSpec b;
      b.center = {{(i + 1) / static_cast<double>(boost.count + 1), 0.5, 0.5}};
      b.radius = boost.radius;
      b.amplitude = boost.amplitude;
      b.aspect = boost.aspect;
      b.profile_plateau = boost.plateau;
      b.plane = {0, 1};
      McResult after;
      f = center_boost(f, b, cert, &rolling, &after);
      rolling = after; // the measured integral of f, reused as the next baseline
    }
    out.integral_after_boost = rolling;
    // the increment must land inside the prescribed window
    double lo = out.spectrum.lambda_c;
    double hi = std::log(1.0 + 2.0 * out.spectrum.alpha_n);
    if (!(out.integral_after_boost.mean - out.integral_after_boost.ci95 > lo &&
          out.integral_after_boost.mean + out.integral_after_boost.ci95 < hi)) {
      std::ostringstream os;
      os << "boost window violated: " << out.integral_after_boost.mean << " +- "
         << out.integral_after_boost.ci95 << " outside (" << lo << ", " << hi << ")";
      fail(Errc::rejected_perturbation, os.str());
    }

    stage = "neighborhood_schedule";
    TorusPoint p{{0, 0, 0}}; // fixed by the linear model and by every boost layer
    out.boosted = f;
    out.schedule = neighborhood_schedule(f, p, surgery.schedule_depth, surgery.orbit_budget,
                                         surgery.eps0, cert.seed, cert.threads);
    if (out.schedule.certified_depth < j)
      fail(Errc::non_convergence,
           "schedule certified only to depth " + std::to_string(out.schedule.certified_depth));

    stage = "fixed_point_surgery";
    out.surgery = make_surgery_spec(out.spectrum, p);
    out.surgery.blend_radius = out.schedule.radii[j];
    f = fixed_point_surgery(f, out.surgery, out.schedule, j, cert);
    out.integral_after_surgery = mc_center_integral(f, field_for(f, out.spectrum, cert.tail),
                                                    cert.mc_budget, cert.seed, cert.threads);

    stage = "certification";
    check_cones_or_reject(f, out.spectrum, cert, "certification", &out.cones);
    out.volume_deviation = volume_check(f, cert.cone_samples, 1e-6).max_deviation;
    out.equivariance = equivariance_residual(f);
    if (!(linearization_of(f) == family_inverse(n)))
      fail(Errc::not_a_torus_map, "homotopy class changed during construction");
    out.map = std::move(f);
    return out;
  } catch (const Error& e) {
    throw Error(e.code(), std::string("build_da_example[") + stage + "]: " + e.what());
  }
}

} // namespace dalab
