#include "dalab/linear_anosov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dalab/errors.hpp"

namespace dalab {

IntegerMatrix3 IntegerMatrix3::identity() {
  IntegerMatrix3 r;
  r.m = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  return r;
}

int64_t IntegerMatrix3::det() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

IntegerMatrix3 IntegerMatrix3::adjugate() const {
  IntegerMatrix3 r;
  r.m[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  r.m[0][1] = -(m[0][1] * m[2][2] - m[0][2] * m[2][1]);
  r.m[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
  r.m[1][0] = -(m[1][0] * m[2][2] - m[1][2] * m[2][0]);
  r.m[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
  r.m[1][2] = -(m[0][0] * m[1][2] - m[0][2] * m[1][0]);
  r.m[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  r.m[2][1] = -(m[0][0] * m[2][1] - m[0][1] * m[2][0]);
  r.m[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  return r;
}

IntegerMatrix3 IntegerMatrix3::operator*(const IntegerMatrix3& o) const {
  IntegerMatrix3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      int64_t s = 0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
      r.m[i][j] = s;
    }
  return r;
}

Mat3 IntegerMatrix3::to_real() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = static_cast<double>(m[i][j]);
  return r;
}

IntegerMatrix3 family_matrix(int64_t n) {
  if (n < 2) fail(Errc::precondition, "family_matrix: n must be >= 2, got " + std::to_string(n));
  IntegerMatrix3 r;
  r.m = {{{0, 0, 1}, {0, 1, -1}, {-1, -1, n}}};
  r.tag = IntegerMatrix3::Tag::family_L;
  r.family_index = n;
  return r;
}

IntegerMatrix3 family_inverse(int64_t n) {
  IntegerMatrix3 r = family_matrix(n).adjugate(); // det = 1, adjugate is the inverse
  r.tag = IntegerMatrix3::Tag::inverse_B;
  r.family_index = n;
  return r;
}

std::array<int64_t, 4> characteristic_polynomial(const IntegerMatrix3& M) {
  const auto& m = M.m;
  int64_t tr = m[0][0] + m[1][1] + m[2][2];
  int64_t m2 = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) +
               (m[0][0] * m[2][2] - m[0][2] * m[2][0]) +
               (m[0][0] * m[1][1] - m[0][1] * m[1][0]);
  return {M.det(), -m2, tr, -1};
}

IntegerMatrix3 characteristic_polynomial_at(const IntegerMatrix3& M) {
  auto c = characteristic_polynomial(M);
  IntegerMatrix3 acc; // c3 M^3 + c2 M^2 + c1 M + c0 I
  IntegerMatrix3 M2 = M * M;
  IntegerMatrix3 M3 = M2 * M;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      acc.m[i][j] = c[3] * M3.m[i][j] + c[2] * M2.m[i][j] + c[1] * M.m[i][j] +
                    (i == j ? c[0] : 0);
  return acc;
}

namespace {

// monic cubic q(x) = x^3 + b x^2 + c x + d from the characteristic polynomial
struct MonicCubic {
  double b, c, d;
  double operator()(double x) const { return ((x + b) * x + c) * x + d; }
  double deriv(double x) const { return (3 * x + 2 * b) * x + c; }
};

MonicCubic monic_from(const std::array<int64_t, 4>& cp) {
  // cp[3] = -1 always for det(M - xI); negate all coefficients to monic
  return MonicCubic{-static_cast<double>(cp[2]), -static_cast<double>(cp[1]),
                    -static_cast<double>(cp[0])};
}

double refine_root(const MonicCubic& q, double lo, double hi, double tol) {
  double flo = q(lo);
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = q(mid);
    if ((flo < 0) == (fm < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo < tol * std::max(1.0, std::fabs(mid))) break;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 8; ++i) {
    double dq = q.deriv(x);
    if (dq == 0) break;
    double step = q(x) / dq;
    x -= step;
    if (std::fabs(step) < tol * std::max(1.0, std::fabs(x))) break;
  }
  return x;
}

// three real roots of the monic cubic, or empty if the discriminant test
// (sign of the cubic at its critical points) fails
bool three_real_roots(const MonicCubic& q, double tol, std::array<double, 3>& out) {
  double disc = 4 * q.b * q.b - 12 * q.c; // of q'
  if (disc <= 0) return false;
  double s = std::sqrt(disc) / 6.0;
  double xm = -q.b / 3.0 - s, xp = -q.b / 3.0 + s;
  if (!(q(xm) > 0 && q(xp) < 0)) return false; // needs local max > 0 > local min
  // outer brackets from the Cauchy bound
  double bound = 1 + std::max({std::fabs(q.b), std::fabs(q.c), std::fabs(q.d)});
  out[0] = refine_root(q, -bound, xm, tol);
  out[1] = refine_root(q, xm, xp, tol);
  out[2] = refine_root(q, xp, bound, tol);
  return true;
}

Vec3 eigenvector_for(const Mat3& A, double lambda) {
  // null vector of (A - lambda I) via the largest cross product of two rows
  Mat3 B = A;
  for (int i = 0; i < 3; ++i) B.m[i][i] -= lambda;
  Vec3 r0 = {B.m[0][0], B.m[0][1], B.m[0][2]};
  Vec3 r1 = {B.m[1][0], B.m[1][1], B.m[1][2]};
  Vec3 r2 = {B.m[2][0], B.m[2][1], B.m[2][2]};
  Vec3 c01 = cross(r0, r1), c02 = cross(r0, r2), c12 = cross(r1, r2);
  Vec3 best = c01;
  if (norm(c02) > norm(best)) best = c02;
  if (norm(c12) > norm(best)) best = c12;
  if (norm(best) == 0) fail(Errc::not_hyperbolic, "eigenvector: repeated eigenvalue");
  return normalized(best);
}

} // namespace

bool has_real_distinct_spectrum(const IntegerMatrix3& M) {
  MonicCubic q = monic_from(characteristic_polynomial(M));
  std::array<double, 3> roots;
  if (!three_real_roots(q, 1e-12, roots)) return false;
  std::array<double, 3> mod = {std::fabs(roots[0]), std::fabs(roots[1]), std::fabs(roots[2])};
  std::sort(mod.begin(), mod.end());
  double scale = std::max(1.0, mod[2]);
  if (mod[1] - mod[0] < 1e-9 * scale || mod[2] - mod[1] < 1e-9 * scale) return false;
  for (double b : mod)
    if (std::fabs(b - 1.0) < 1e-9) return false;
  return true;
}

LinearSpectrum spectral_triple(const IntegerMatrix3& M, double tol) {
  MonicCubic q = monic_from(characteristic_polynomial(M));
  std::array<double, 3> roots;
  if (!three_real_roots(q, tol, roots))
    fail(Errc::not_hyperbolic, "spectral_triple: spectrum is not real with distinct roots");

  // sort by modulus and check hyperbolicity
  std::sort(roots.begin(), roots.end(),
            [](double a, double b) { return std::fabs(a) < std::fabs(b); });
  std::array<double, 3> mod = {std::fabs(roots[0]), std::fabs(roots[1]), std::fabs(roots[2])};
  double scale = std::max(1.0, mod[2]);
  if (mod[1] - mod[0] < 1e-9 * scale || mod[2] - mod[1] < 1e-9 * scale)
    fail(Errc::not_hyperbolic, "spectral_triple: eigenvalue moduli not distinct");
  for (double b : mod)
    if (std::fabs(b - 1.0) < 1e-9)
      fail(Errc::not_hyperbolic, "spectral_triple: eigenvalue of modulus one");
  for (double r : roots)
    if (std::fabs(q(r)) > 1e-6 * std::max(1.0, std::fabs(q.d)))
      fail(Errc::numeric, "spectral_triple: root polishing did not converge");

  Mat3 A = M.to_real();
  LinearSpectrum s;
  s.beta_s = mod[0];
  s.beta_c = mod[1];
  s.beta_u = mod[2];
  s.lambda_s = std::log(s.beta_s);
  s.lambda_c = std::log(s.beta_c);
  s.lambda_u = std::log(s.beta_u);
  s.alpha_n = s.beta_c - 1.0;
  s.e_s = eigenvector_for(A, roots[0]);
  s.e_c = eigenvector_for(A, roots[1]);
  s.e_u = eigenvector_for(A, roots[2]);
  // orientation: toward the limiting axes (1,0,0), (0,1,0), (0,0,1)
  if (s.e_u[0] < 0) s.e_u = -s.e_u;
  if (s.e_c[1] < 0) s.e_c = -s.e_c;
  if (s.e_s[2] < 0) s.e_s = -s.e_s;
  s.n = M.family_index;
  return s;
}

std::array<double, 3> linear_lyapunov_exponents(const LinearSpectrum& s) {
  return {s.lambda_s, s.lambda_c, s.lambda_u};
}

double linear_entropy(const LinearSpectrum& s) {
  double h = 0;
  for (double l : {s.lambda_s, s.lambda_c, s.lambda_u})
    if (l > 0) h += l;
  return h;
}

} // namespace dalab
