#pragma once

// Finite-horizon Lyapunov data along the computed splitting: Birkhoff
// averages of one-step logs, the orbit QR estimator, Monte-Carlo volume
// integrals of log |Df restricted to E^c|, and level-set fractions of
// finite-time center exponents. Every output carries its horizon; nothing
// here claims an almost-everywhere limit.

#include <array>
#include <cstdint>
#include <vector>

#include "dalab/splitting.hpp"
#include "dalab/torus_dynamics.hpp"

namespace dalab {

struct ExponentEstimate {
  TorusPoint point;
  int horizon = 0;
  char sigma = 'c'; // 's' | 'c' | 'u'
  double value = 0; // (1/n) sum of log |Df|E^sigma| along the orbit
};

// Birkhoff average of log |Df restricted to E^sigma| along the n-orbit of x,
// with the field refined on the fly at every orbit point.
ExponentEstimate finite_time_exponent(const DiffeoSpec& f, const SplittingField& S,
                                      const TorusPoint& x, int n, char sigma);

// All three finite-time exponents at once (shares the orbit work).
std::array<double, 3> finite_time_exponents(const DiffeoSpec& f, const SplittingField& S,
                                            const TorusPoint& x, int n);

// Orbit QR estimator: pushes an orthonormal 3-frame seeded on the reference
// eigenbasis and averages the log diagonal of the per-step QR factors.
// Returns (lambda_s, lambda_c, lambda_u)-ordered values. Independent of the
// field refinement path; used as a cross-check oracle.
std::array<double, 3> qr_exponents(const DiffeoSpec& f, const LinearSpectrum& reference,
                                   const TorusPoint& x, int horizon);

struct McResult {
  double mean = 0;
  double ci95 = 0; // half-width, iid normal approximation
  long budget = 0;
};

// Volume integral of log |Df|E^c| by quasi-random one-step samples. The
// integrand is a function on the torus, so no orbit averaging is involved.
McResult mc_center_integral(const DiffeoSpec& f, const SplittingField& S, long budget,
                            uint64_t seed, int threads = 0);

struct LevelSetEstimate {
  double threshold = 0;
  int start_n = 1;     // membership is required for all k in [start_n, horizon]
  int horizon = 0;
  double fraction = 0; // sampled volume fraction of the level set
  long sample_count = 0;
  // per-sample finite-time center exponent at the full horizon, for
  // histograms and the absolute-continuity diagnostic
  std::vector<double> center_values;
  std::vector<TorusPoint> sample_points;
};

// Fraction of sampled x with |Df^k|E^c(x)| >= exp(k * threshold) for every
// k in [start_n, horizon].
LevelSetEstimate level_set_fraction(const DiffeoSpec& f, const SplittingField& S,
                                    double threshold, int start_n, int horizon, long budget,
                                    uint64_t seed, int threads = 0);

// |sum_sigma value_sigma - (1/n) sum log det Df| is bounded by the angle
// correction below; exact equality needs an orthogonal splitting.
double sum_rule_angle_bound(const SplittingField& S, const TorusPoint& x, int n);

// CSV row block for external plotting: point, horizon, sigma, value.
std::string exponent_csv_header();
std::string exponent_csv_row(const ExponentEstimate& e);

} // namespace dalab
