#include "dalab/splitting.hpp"

#include <cmath>

#include "dalab/errors.hpp"
#include "dalab/parallel.hpp"
#include "dalab/rng.hpp"

namespace dalab {

ConeSpec ConeSpec::from_spectrum(const LinearSpectrum& s, double theta, ConeKind kind) {
  if (!(theta > 0 && theta < 1)) fail(Errc::precondition, "ConeSpec: theta must be in (0,1)");
  ConeSpec c;
  c.e_u = s.e_u;
  c.e_c = s.e_c;
  c.e_s = s.e_s;
  c.basis = s.basis();
  c.basis_inverse = c.basis.inverse();
  c.theta = theta;
  c.kind = kind;
  return c;
}

namespace {

// boundary ray of the theta-cone, parametrized over [0, nrays)
Vec3 boundary_coeffs(ConeKind kind, double theta, int ray, int nrays) {
  double t = -1.0 + 2.0 * (ray + 0.5) / nrays;
  double m1 = t;
  double m2 = (ray % 2 ? 1.0 : -1.0) * (1.0 - std::fabs(t));
  switch (kind) {
    case ConeKind::u: return {1.0, theta * m1, theta * m2};
    case ConeKind::s: return {theta * m1, theta * m2, 1.0};
    case ConeKind::cu: return {m1, m2, theta * (std::fabs(m1) + std::fabs(m2))};
    case ConeKind::cs: return {theta * (std::fabs(m1) + std::fabs(m2)), m1, m2};
  }
  return {};
}

double cone_margin(ConeKind kind, double theta, const Vec3& w) {
  double au = std::fabs(w[0]), ac = std::fabs(w[1]), as = std::fabs(w[2]);
  switch (kind) {
    case ConeKind::u: return 1.0 - (ac + as) / (theta * au);
    case ConeKind::s: return 1.0 - (au + ac) / (theta * as);
    case ConeKind::cu: return 1.0 - as / (theta * (au + ac));
    case ConeKind::cs: return 1.0 - au / (theta * (ac + as));
  }
  return 0;
}

bool forward_kind(ConeKind k) { return k == ConeKind::u || k == ConeKind::cu; }

} // namespace

ConeReport cone_invariance_check(const DiffeoSpec& f, const ConeSpec& cone, long samples,
                                 int rays, int threads) {
  HaltonSampler qmc(7, "cone-check");
  std::vector<double> margins(samples);
  std::vector<Vec3> points(samples);
  parallel_for(samples, threads, [&](int64_t i) {
    Vec3 x = qmc.point(i);
    points[i] = x;
    Mat3 J = f.derivative(x);
    Mat3 M = forward_kind(cone.kind) ? cone.basis_inverse * J * cone.basis
                                     : cone.basis_inverse * J.inverse() * cone.basis;
    double worst = 1e300;
    for (int r = 0; r < rays; ++r) {
      Vec3 v = boundary_coeffs(cone.kind, cone.theta, r, rays);
      worst = std::min(worst, cone_margin(cone.kind, cone.theta, M * v));
    }
    margins[i] = worst;
  });
  ConeReport rep;
  rep.samples = samples;
  rep.rays = rays;
  rep.min_margin = 1e300;
  for (long i = 0; i < samples; ++i) {
    if (margins[i] < rep.min_margin) {
      rep.min_margin = margins[i];
      rep.worst_point = {points[i]};
    }
    if (margins[i] < 0) ++rep.violations;
  }
  return rep;
}

std::array<ConeReport, 4> cone_invariance_check_all(const DiffeoSpec& f, const LinearSpectrum& s,
                                                    double theta, long samples, int rays,
                                                    int threads) {
  std::array<ConeReport, 4> out;
  ConeKind kinds[4] = {ConeKind::u, ConeKind::s, ConeKind::cu, ConeKind::cs};
  for (int i = 0; i < 4; ++i)
    out[i] = cone_invariance_check(f, ConeSpec::from_spectrum(s, theta, kinds[i]), samples, rays,
                                   threads);
  return out;
}

SplittingFrame refine_frame(const DiffeoSpec& f, const LinearSpectrum& ref, const Vec3& x,
                            int tail, double /*early_exit_tol*/) {
  // backward orbit for the forward pushes, forward orbit for the backward ones
  std::vector<Vec3> back(tail + 1), fwd(tail + 1);
  back[0] = x;
  fwd[0] = x;
  for (int k = 1; k <= tail; ++k) {
    back[k] = f.lift_inverse(back[k - 1]);
    fwd[k] = f.lift(fwd[k - 1]);
  }

  // E^u and the cu-plane: push forward along back[tail] ... back[1] -> x
  Vec3 vu = ref.e_u, a = ref.e_u, b = ref.e_c;
  for (int k = tail; k >= 1; --k) {
    Mat3 J = f.derivative(back[k]);
    vu = normalized(J * vu);
    a = normalized(J * a);
    Vec3 bb = J * b;
    bb = bb - dot(bb, a) * a;
    b = normalized(bb);
  }
  Vec3 n_cu = normalized(cross(a, b));

  // E^s and the cs-plane: pull back along fwd[tail] ... fwd[1] -> x;
  // D(f^{-1}) at fwd[k] is the inverse of Df at fwd[k-1]
  Vec3 vs = ref.e_s, c = ref.e_c, d = ref.e_s;
  for (int k = tail; k >= 1; --k) {
    Mat3 J = f.derivative(fwd[k - 1]).inverse();
    vs = normalized(J * vs);
    d = normalized(J * d);
    Vec3 cc = J * c;
    cc = cc - dot(cc, d) * d;
    c = normalized(cc);
  }
  Vec3 n_cs = normalized(cross(c, d));

  SplittingFrame fr;
  fr.e_u = dot(vu, ref.e_u) < 0 ? -vu : vu;
  fr.e_s = dot(vs, ref.e_s) < 0 ? -vs : vs;
  Vec3 ec = normalized(cross(n_cu, n_cs));
  fr.e_c = dot(ec, ref.e_c) < 0 ? -ec : ec;
  return fr;
}

SplittingFrame SplittingField::at(const Vec3& x) const {
  return refine_frame(map, reference, x, tail);
}

double SplittingField::max_residual() const {
  double r = 0;
  for (size_t i = 0; i < sample_set.size(); ++i)
    r = std::max({r, residual_u[i], residual_c[i], residual_s[i]});
  return r;
}

double SplittingField::min_pairwise_angle() const {
  double a = 1e300;
  for (size_t i = 0; i < sample_set.size(); ++i) {
    a = std::min(a, line_angle(e_u[i], e_c[i]));
    a = std::min(a, line_angle(e_c[i], e_s[i]));
    a = std::min(a, line_angle(e_u[i], e_s[i]));
  }
  return a;
}

SplittingField refine_splitting(const DiffeoSpec& f, const LinearSpectrum& reference,
                                std::span<const TorusPoint> seeds, int iterations,
                                double residual_tol, int threads) {
  SplittingField S;
  S.map = f;
  S.reference = reference;
  S.tail = iterations;
  S.residual_tol = residual_tol;
  size_t n = seeds.size();
  S.sample_set.assign(seeds.begin(), seeds.end());
  S.e_u.resize(n);
  S.e_c.resize(n);
  S.e_s.resize(n);
  S.residual_u.resize(n);
  S.residual_c.resize(n);
  S.residual_s.resize(n);

  parallel_for(static_cast<int64_t>(n), threads, [&](int64_t i) {
    Vec3 x = seeds[i].v;
    SplittingFrame here = refine_frame(f, reference, x, iterations);
    Vec3 fx = f.lift(x);
    SplittingFrame there = refine_frame(f, reference, fx, iterations);
    Mat3 J = f.derivative(x);
    auto resid = [&](const Vec3& v_here, const Vec3& v_there) {
      Vec3 img = normalized(J * v_here);
      return std::min(norm(img - v_there), norm(img + v_there));
    };
    S.e_u[i] = here.e_u;
    S.e_c[i] = here.e_c;
    S.e_s[i] = here.e_s;
    S.residual_u[i] = resid(here.e_u, there.e_u);
    S.residual_c[i] = resid(here.e_c, there.e_c);
    S.residual_s[i] = resid(here.e_s, there.e_s);
  });

  if (S.max_residual() > residual_tol) {
    // residual trace for diagnosis: re-run the worst point with doubled tail
    size_t worst = 0;
    double wr = 0;
    for (size_t i = 0; i < n; ++i) {
      double r = std::max({S.residual_u[i], S.residual_c[i], S.residual_s[i]});
      if (r > wr) {
        wr = r;
        worst = i;
      }
    }
    SplittingFrame redo = refine_frame(f, reference, S.sample_set[worst].v, 2 * iterations);
    Vec3 img = normalized(f.derivative(S.sample_set[worst].v) * redo.e_c);
    SplittingFrame there =
        refine_frame(f, reference, f.lift(S.sample_set[worst].v), 2 * iterations);
    double redo_res = std::min(norm(img - there.e_c), norm(img + there.e_c));
    if (redo_res > residual_tol)
      fail(Errc::non_convergence,
           "refine_splitting: residual plateau " + std::to_string(wr) + " -> " +
               std::to_string(redo_res) + " at doubled iterations");
  }
  return S;
}

AbsolutePhReport absolute_ph_check(const DiffeoSpec& f, const SplittingField& S, long samples,
                                   int threads) {
  HaltonSampler qmc(13, "absolute-ph");
  std::vector<double> su(samples), sc(samples), ss(samples);
  parallel_for(samples, threads, [&](int64_t i) {
    Vec3 x = qmc.point(i);
    SplittingFrame fr = S.at(x);
    Mat3 J = f.derivative(x);
    su[i] = norm(J * fr.e_u);
    sc[i] = norm(J * fr.e_c);
    ss[i] = norm(J * fr.e_s);
  });
  AbsolutePhReport r;
  r.samples = samples;
  double max_s = 0, min_c = 1e300, max_c = 0, min_u = 1e300;
  for (long i = 0; i < samples; ++i) {
    max_s = std::max(max_s, ss[i]);
    min_c = std::min(min_c, sc[i]);
    max_c = std::max(max_c, sc[i]);
    min_u = std::min(min_u, su[i]);
  }
  r.min_gap_sc = min_c - max_s;
  r.min_gap_cu = min_u - max_c;
  r.contraction_max = max_s;
  r.expansion_min = min_u;
  r.pass = r.min_gap_sc > 0 && r.min_gap_cu > 0 && r.contraction_max < 1 && r.expansion_min > 1;
  return r;
}

} // namespace dalab
