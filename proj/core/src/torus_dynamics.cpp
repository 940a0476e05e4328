#include "dalab/torus_dynamics.hpp"

#include <cmath>
#include <string>

#include "dalab/errors.hpp"
#include "dalab/rng.hpp"

namespace dalab {

TorusPoint project_to_torus(const LiftPoint& p) { return {fract(p.v)}; }

nlohmann::json DiffeoSpec::stack_json() const {
  return stack ? stack->to_json() : nlohmann::json(nullptr);
}

DiffeoSpec linear_diffeo(const IntegerMatrix3& A) {
  auto st = std::make_shared<MapStack>(MapStack::from_linear(A));
  std::optional<LinearSpectrum> spec;
  if (has_real_distinct_spectrum(A)) spec = spectral_triple(A);
  return stack_diffeo(st, spec, TorusPoint{{0, 0, 0}});
}

DiffeoSpec stack_diffeo(std::shared_ptr<const MapStack> stack, std::optional<LinearSpectrum> base,
                        std::optional<TorusPoint> fixed_point) {
  DiffeoSpec f;
  f.lift = [stack](const Vec3& x) { return stack->lift(x); };
  f.lift_inverse = [stack](const Vec3& y) { return stack->lift_inverse(y); };
  f.derivative = [stack](const Vec3& x) { return stack->derivative(x); };
  f.linear_part = stack->linear_int;
  f.stack = stack;
  f.base_spectrum = base;
  f.fixed_point = fixed_point;
  f.smoothness = Smoothness::c_infty_piecewise;
  return f;
}

IntegerMatrix3 linearization_of(const DiffeoSpec& f, int samples) {
  RngStream rng(11, "linearization");
  IntegerMatrix3 A;
  A.tag = IntegerMatrix3::Tag::user;
  for (int j = 0; j < 3; ++j) {
    Vec3 ej{0, 0, 0};
    ej[j] = 1;
    Vec3 first{};
    for (int s = 0; s < samples; ++s) {
      Vec3 x = rng.uniform3(s);
      Vec3 d = f.lift(x + ej) - f.lift(x);
      if (s == 0) {
        first = d;
      } else if (norm_inf(d - first) > 0.05) {
        fail(Errc::not_a_torus_map, "linearization_of: lattice displacement depends on base point");
      }
    }
    for (int i = 0; i < 3; ++i) {
      double r = std::round(first[i]);
      if (std::fabs(first[i] - r) >= 0.1)
        fail(Errc::not_a_torus_map, "linearization_of: non-integer displacement " +
                                        std::to_string(first[i]));
      A.m[i][j] = static_cast<int64_t>(r);
    }
  }
  return A;
}

double equivariance_residual(const DiffeoSpec& f, int samples, uint64_t seed) {
  RngStream rng(seed, "equivariance");
  Mat3 A = f.linear_part.to_real();
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    Vec3 x = rng.uniform3(2 * s);
    Vec3 u = rng.uniform3(2 * s + 1);
    Vec3 k = {std::floor(u[0] * 5) - 2, std::floor(u[1] * 5) - 2, std::floor(u[2] * 5) - 2};
    Vec3 d = f.lift(x + k) - f.lift(x) - A * k;
    worst = std::max(worst, norm_inf(d));
  }
  return worst;
}

double inverse_consistency_residual(const DiffeoSpec& f, int samples, uint64_t seed) {
  RngStream rng(seed, "inverse-consistency");
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    Vec3 x = rng.uniform3(s);
    worst = std::max(worst, norm_inf(f.lift_inverse(f.lift(x)) - x));
  }
  return worst;
}

VolumeReport volume_check(const DiffeoSpec& f, long samples, double tol, uint64_t seed) {
  HaltonSampler qmc(seed, "volume-check");
  VolumeReport r;
  r.tol = tol;
  for (long i = 0; i < samples; ++i) {
    Vec3 x = qmc.point(i);
    double dev = std::fabs(f.derivative(x).det() - 1.0);
    if (dev > r.max_deviation) {
      r.max_deviation = dev;
      r.worst_point = {x};
    }
  }
  r.pass = r.max_deviation <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Semiconjugacy

namespace {

struct GridIndexer {
  int n;
  int idx(int i, int j, int k) const {
    auto w = [this](int a) { return ((a % n) + n) % n; };
    return (w(i) * n + w(j)) * n + w(k);
  }
};

Vec3 trilinear(const std::vector<Vec3>& u, int n, const Vec3& x) {
  GridIndexer g{n};
  double fx = fract(x[0]) * n, fy = fract(x[1]) * n, fz = fract(x[2]) * n;
  int i0 = static_cast<int>(fx), j0 = static_cast<int>(fy), k0 = static_cast<int>(fz);
  double a = fx - i0, b = fy - j0, c = fz - k0;
  Vec3 acc{0, 0, 0};
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        double w = (di ? a : 1 - a) * (dj ? b : 1 - b) * (dk ? c : 1 - c);
        acc = acc + w * u[g.idx(i0 + di, j0 + dj, k0 + dk)];
      }
  return acc;
}

} // namespace

Vec3 SemiconjugacyField::displacement_at(const Vec3& x) const {
  return trilinear(displacement, grid, x);
}

Vec3 SemiconjugacyField::apply(const Vec3& x) const { return x + displacement_at(x); }

SemiconjugacyField semiconjugacy_solve(const DiffeoSpec& f, const IntegerMatrix3& A,
                                       int grid_resolution, int max_sweeps, double tol,
                                       int validation_samples) {
  if (!(linearization_of(f) == A))
    fail(Errc::precondition, "semiconjugacy_solve: f is not homotopic to A");
  LinearSpectrum sp = spectral_triple(A);
  Mat3 Ar = A.to_real();
  Mat3 P = sp.basis();
  Mat3 Pinv = P.inverse();
  // signed eigenvalues matched to the basis columns (u, c, s)
  Vec3 cols[3] = {sp.e_u, sp.e_c, sp.e_s};
  double ev[3];
  for (int i = 0; i < 3; ++i) ev[i] = dot(Ar * cols[i], cols[i]);

  int n = grid_resolution;
  long total = static_cast<long>(n) * n * n;
  std::vector<Vec3> u(total, Vec3{0, 0, 0});
  std::vector<Vec3> fx(total), fix(total), dfx(total), dfix(total);
  GridIndexer g{n};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Vec3 x = {static_cast<double>(i) / n, static_cast<double>(j) / n,
                  static_cast<double>(k) / n};
        long id = g.idx(i, j, k);
        fx[id] = f.lift(x);
        fix[id] = f.lift_inverse(x);
        dfx[id] = Ar * x - fx[id];        // periodic defect, evaluated exactly
        dfix[id] = Ar * fix[id] - x;      // defect at the preimage: A fix - f(fix)
      }

  SemiconjugacyField field;
  field.grid = n;
  double prev_res = -1;
  std::vector<Vec3> next(total);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double res = 0;
    for (long id = 0; id < total; ++id) {
      Vec3 ufx = trilinear(u, n, fx[id]);
      Vec3 ufix = trilinear(u, n, fix[id]);
      Vec3 cfx = Pinv * ufx;   // eigen coordinates of u at f(x)
      Vec3 cx = Pinv * u[id];
      Vec3 cfix = Pinv * ufix;
      Vec3 dx = Pinv * dfx[id];
      Vec3 dix = Pinv * dfix[id];
      Vec3 cnew;
      for (int sidx = 0; sidx < 3; ++sidx) {
        if (std::fabs(ev[sidx]) > 1.0)
          cnew[sidx] = (cfx[sidx] - dx[sidx]) / ev[sidx]; // backward series
        else
          cnew[sidx] = dix[sidx] + ev[sidx] * cfix[sidx]; // forward series
      }
      next[id] = P * cnew;
      res = std::max(res, norm_inf(next[id] - u[id]));
    }
    u.swap(next);
    field.sweeps = sweep + 1;
    if (prev_res > 0 && res > 0) field.contraction_estimate = res / prev_res;
    prev_res = res;
    // remaining error is bounded by update / (1 - contraction)
    double gamma = std::min(0.98, std::max(field.contraction_estimate, 0.5));
    if (res < tol * 0.5 * (1.0 - gamma)) break;
  }
  field.displacement = std::move(u);

  HaltonSampler qmc(5, "semiconjugacy-validation");
  double res = 0;
  for (int i = 0; i < validation_samples; ++i) {
    Vec3 x = qmc.point(i);
    Vec3 lhs = f.lift(x);
    lhs = lhs + field.displacement_at(lhs);       // h(f x)
    Vec3 rhs = Ar * (x + field.displacement_at(x)); // A h(x)
    res = std::max(res, norm_inf(lhs - rhs));
  }
  field.residual = res;
  if (res > tol)
    fail(Errc::non_convergence,
         "semiconjugacy_solve: residual " + std::to_string(res) + " above tol after " +
             std::to_string(field.sweeps) + " sweeps (center eigenvalue " +
             std::to_string(sp.beta_c) + " close to 1)");
  return field;
}

} // namespace dalab
