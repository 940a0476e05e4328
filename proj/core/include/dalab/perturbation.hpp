#pragma once

// Exactly volume-preserving perturbations of the linear model and the
// staged construction of the non-Anosov examples.
//
// center_boost composes the map with compactly supported elliptic twists in
// the coordinate plane aligned with (E^u, E^c). The rotation mixes the
// unstable direction into the center bundle, which raises the volume
// integral of log |Dg|E^c| at second order in the angle; the aspect
// parameter shapes the couplings so the cone criterion keeps a margin at the
// default theta. (Plain coordinate shears cannot do this: their coupling
// product integrates to zero over the torus, so the gain vanishes at second
// order.)
//
// fixed_point_surgery changes the derivative at a fixed point to the
// prescribed target inside a schedule ball, leaving the map bit-identical
// outside, via the ball-supported squeeze layer of map_stack.hpp.

#include <cstdint>
#include <vector>

#include "dalab/lyapunov.hpp"
#include "dalab/splitting.hpp"
#include "dalab/torus_dynamics.hpp"

namespace dalab {

struct BumpSpec {
  TorusPoint center;              // the coordinate along the cylinder axis is unused
  double radius = 0.16;           // disc radius in conjugated coordinates, < 1/2
  double amplitude = 0.35;        // maximal rotation angle
  double profile_plateau = 0.55;  // fraction of the radius at full angle
  std::array<int, 2> plane{0, 1}; // (u-like axis, c-like axis)
  double aspect = 0.42;           // coupling shaping; support semi-axes (r*mu, r/mu)

  void validate() const; // throws Errc::precondition on malformed geometry
};

struct BoostCertification {
  double theta = 0.1;
  long cone_samples = 20000;
  long mc_budget = 100000;
  int tail = 24; // refinement tail for the certification integrals
  uint64_t seed = 1;
  int threads = 0;
};

// Composes f with the twist realizing b and certifies the result: the cone
// fields at theta must stay strictly invariant and the Monte-Carlo center
// integral must strictly increase with separated 95% intervals. Throws
// Errc::rejected_perturbation with the failing sample or interval otherwise.
// amplitude == 0 returns f with evaluations bit-identical to the input.
// before/after, when given, receive the certification integrals (and a
// non-null *before with matching budget is trusted as the baseline).
DiffeoSpec center_boost(const DiffeoSpec& f, const BumpSpec& b, const BoostCertification& cert,
                        McResult* before = nullptr, McResult* after = nullptr);

struct NeighborhoodSchedule {
  TorusPoint fixed_point;
  std::vector<double> radii;       // eps_0 > eps_1 > ...
  int certified_depth = 0;         // largest verified level
  std::vector<double> min_return_distance; // sampled orbit clearance per level
};

// Nested ball schedule around the fixed point p: radii shrink so that over
// the sampled seeds outside level j, the orbit enters level j+1 only after
// more than j+1 steps in either time direction; level diameters stay below
// 1/(j+1). Levels that exhaust the budget are returned uncertified.
NeighborhoodSchedule neighborhood_schedule(const DiffeoSpec& f, const TorusPoint& p, int j_max,
                                           long orbit_budget, double eps0 = 0.05,
                                           uint64_t seed = 1, int threads = 0);

struct SurgerySpec {
  TorusPoint fixed_point;
  Mat3 target_derivative;
  double blend_radius = 0;                  // set from the schedule level
  std::array<Vec3, 3> matched_eigenspaces;  // (e_u, e_c, e_s) of the unperturbed derivative

  void validate() const; // det within 1e-12 and eigenspace match
};

// Target with the unstable restriction unchanged, center eigenvalue
// 1 - alpha_n, and stable eigenvalue forced by unit determinant.
SurgerySpec make_surgery_spec(const LinearSpectrum& s, const TorusPoint& p);

// Derivative surgery at the fixed point: g(p) = p, g == f outside the level-j
// ball (bit-exact), Dg(p) equal to the target, volume preserved to working
// precision. Throws Errc::precondition if p is not fixed or j exceeds the
// certified depth, Errc::rejected_perturbation if the cone check fails after.
DiffeoSpec fixed_point_surgery(const DiffeoSpec& f, const SurgerySpec& s,
                               const NeighborhoodSchedule& schedule, int j,
                               const BoostCertification& cert);

struct BoostParams {
  int count = 3;
  double amplitude = 0.35;
  double radius = 0.16;
  double aspect = 0.42;
  double plateau = 0.55;
};

struct SurgeryParams {
  double eps0 = 0.05;
  long orbit_budget = 10000;
  int schedule_depth = 5;
};

struct BuiltExample {
  DiffeoSpec map;
  DiffeoSpec boosted; // pre-surgery stage, for alternate surgery depths
  LinearSpectrum spectrum;
  NeighborhoodSchedule schedule;
  SurgerySpec surgery;
  McResult integral_before_boost, integral_after_boost, integral_after_surgery;
  std::array<ConeReport, 4> cones;
  double volume_deviation = 0;
  double equivariance = 0;
};

// Full pipeline: linear B_n -> boosted Anosov -> schedule -> surgery at the
// origin. The result is cone-certified, conservative within tolerance,
// homotopic to B_n, and has a two-dimensional contracting derivative at the
// fixed point. Stage failures propagate with the stage name in the message.
BuiltExample build_da_example(int64_t n, int j, const BoostParams& boost,
                              const SurgeryParams& surgery, const BoostCertification& cert);

} // namespace dalab
