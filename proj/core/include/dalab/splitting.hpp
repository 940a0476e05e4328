#pragma once

// Cone-field certification of partial hyperbolicity and computation of the
// invariant splitting E^s + E^c + E^u for constructed maps.
//
// Cones are defined by coefficients in the eigenbasis of the linear model:
//   u:  |b| + |k| <= theta |a|        (forward invariant)
//   s:  |a| + |b| <= theta |k|        (invariant under the inverse)
//   cu: |k| <= theta (|a| + |b|)      (forward invariant)
//   cs: |a| <= theta (|b| + |k|)      (invariant under the inverse)
// for tangent vectors a e_u + b e_c + k e_s.

#include <cstdint>
#include <span>
#include <vector>

#include "dalab/linalg.hpp"
#include "dalab/linear_anosov.hpp"
#include "dalab/torus_dynamics.hpp"

namespace dalab {

enum class ConeKind { u, s, cu, cs };

struct ConeSpec {
  Vec3 e_u{}, e_c{}, e_s{}; // raw eigenbasis of the linear model
  Mat3 basis;               // columns e_u, e_c, e_s
  Mat3 basis_inverse;
  double theta = 0.1;
  ConeKind kind = ConeKind::u;

  static ConeSpec from_spectrum(const LinearSpectrum& s, double theta, ConeKind kind);
};

struct ConeReport {
  long violations = 0;
  double min_margin = 0; // relative slack of the defining inequality, worst case
  TorusPoint worst_point;
  long samples = 0;
  int rays = 0;
};

// Strict invariance of the cone family on sampled boundary rays. Forward
// image for u/cu, pull-back under the derivative inverse for s/cs.
// Violations are data, not errors.
ConeReport cone_invariance_check(const DiffeoSpec& f, const ConeSpec& cone, long samples,
                                 int rays = 16, int threads = 0);

// all four kinds at a common theta
std::array<ConeReport, 4> cone_invariance_check_all(const DiffeoSpec& f,
                                                    const LinearSpectrum& s, double theta,
                                                    long samples, int rays = 16,
                                                    int threads = 0);

struct SplittingFrame {
  Vec3 e_u{}, e_c{}, e_s{};
};

// Sampled unit direction fields with invariance residuals.
struct SplittingField {
  DiffeoSpec map;            // evaluation closures are cheap shared copies
  LinearSpectrum reference;  // orientation and cone basis
  int tail = 60;             // orbit length for the power iteration
  double residual_tol = 1e-6;

  std::vector<TorusPoint> sample_set;
  std::vector<Vec3> e_u, e_c, e_s;
  std::vector<double> residual_u, residual_c, residual_s;

  // On-the-fly refinement at an arbitrary point: E^u from forward pushes
  // along the backward-orbit tail, E^s from backward pushes, E^c as the
  // intersection of the pushed cu- and cs-planes.
  SplittingFrame at(const Vec3& x) const;

  double max_residual() const;
  // smallest pairwise angle between the three fields over the sample set
  double min_pairwise_angle() const;
};

// Refines the splitting at the given seeds and certifies residuals.
// Requires cone invariance (checked by the caller; see build pipelines).
// Throws Errc::non_convergence if residuals plateau above tolerance.
SplittingField refine_splitting(const DiffeoSpec& f, const LinearSpectrum& reference,
                                std::span<const TorusPoint> seeds, int iterations = 60,
                                double residual_tol = 1e-6, int threads = 0);

// Frame refinement without constructing a field (shared by estimators).
SplittingFrame refine_frame(const DiffeoSpec& f, const LinearSpectrum& reference, const Vec3& x,
                            int tail, double early_exit_tol = 1e-10);

struct AbsolutePhReport {
  double min_gap_sc = 0;       // min over pairs of |Df v^c|(y) - |Df v^s|(x)
  double min_gap_cu = 0;       // min over pairs of |Df v^u|(z) - |Df v^c|(y)
  double expansion_min = 0;    // min |Df v^u|
  double contraction_max = 0;  // max |Df v^s|
  long samples = 0;
  bool pass = false;
};

// Absolute comparison across base points: extremal one-step stretches of the
// computed fields over a sample set, which bounds every (x, y, z) triple from
// the sample set simultaneously.
AbsolutePhReport absolute_ph_check(const DiffeoSpec& f, const SplittingField& S, long samples,
                                   int threads = 0);

} // namespace dalab
