#pragma once

// The explicit family of hyperbolic toral automorphisms and their spectra.
//
// family_matrix(n) is the integer matrix with rows (0,0,1), (0,1,-1),
// (-1,-1,n); family_inverse(n) is its exact integer inverse, the map whose
// center eigenvalue sits just above 1 and is the base of every constructed
// example. Spectra are computed from the exact characteristic cubic by
// bracketed bisection plus Newton polishing; no external eigensolver.

#include <array>
#include <cstdint>

#include "dalab/linalg.hpp"

namespace dalab {

struct IntegerMatrix3 {
  enum class Tag { family_L, inverse_B, user };

  std::array<std::array<int64_t, 3>, 3> m{};
  Tag tag = Tag::user;
  int64_t family_index = 0; // n, when tag is family_L or inverse_B

  static IntegerMatrix3 identity();

  int64_t det() const;
  IntegerMatrix3 adjugate() const; // transpose of cofactors; inverse when det = 1
  IntegerMatrix3 operator*(const IntegerMatrix3& o) const;
  bool operator==(const IntegerMatrix3& o) const { return m == o.m; }

  Mat3 to_real() const;
};

// L_n. Requires n >= 2; the matrix is unimodular for every n but the spectrum
// is only real and distinct from n = 5 on (checked at spectral_triple time).
IntegerMatrix3 family_matrix(int64_t n);

// B_n = L_n^{-1}, the expanding-center member actually iterated everywhere.
IntegerMatrix3 family_inverse(int64_t n);

// Coefficients c of det(M - xI) = c[0] + c[1] x + c[2] x^2 + c[3] x^3, exact.
std::array<int64_t, 4> characteristic_polynomial(const IntegerMatrix3& M);

// Evaluates the characteristic polynomial at M itself (integer arithmetic).
// Zero by Cayley-Hamilton; exposed for verification.
IntegerMatrix3 characteristic_polynomial_at(const IntegerMatrix3& M);

// True iff the characteristic cubic has three real roots of pairwise distinct
// moduli, none of modulus 1 (sign-change test on the exact cubic).
bool has_real_distinct_spectrum(const IntegerMatrix3& M);

struct LinearSpectrum {
  // eigenvalue moduli, sorted beta_s < beta_c < beta_u
  double beta_s = 0, beta_c = 0, beta_u = 0;
  // per-iterate exponents, log of the moduli
  double lambda_s = 0, lambda_c = 0, lambda_u = 0;
  double alpha_n = 0; // beta_c - 1
  // unit eigenvectors, oriented toward the limiting coordinate axes
  Vec3 e_s{}, e_c{}, e_u{};
  int64_t n = 0; // family index, 0 for user matrices

  Mat3 basis() const { return Mat3::from_columns(e_u, e_c, e_s); }
};

// Roots of the characteristic cubic with matched unit eigenvectors.
// Throws Errc::not_hyperbolic on complex/repeated/unit-modulus spectra and
// Errc::numeric if polishing stalls above tol.
LinearSpectrum spectral_triple(const IntegerMatrix3& M, double tol = 1e-12);

// (lambda_s, lambda_c, lambda_u)
std::array<double, 3> linear_lyapunov_exponents(const LinearSpectrum& s);

// Sum of positive exponents (metric entropy of the linear automorphism).
double linear_entropy(const LinearSpectrum& s);

} // namespace dalab
