#pragma once

// Volume-preserving diffeomorphisms of the 3-torus, represented by their
// lifts to R^3. Built maps carry a construction stack (see map_stack.hpp) so
// evaluation is exact everywhere; grids appear only in the semiconjugacy
// field. Custom closures are accepted too, mainly for tests and controls.

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "dalab/linalg.hpp"
#include "dalab/linear_anosov.hpp"
#include "dalab/map_stack.hpp"

namespace dalab {

struct TorusPoint {
  Vec3 v{}; // coordinates in [0,1)
};

struct LiftPoint {
  Vec3 v{};
};

// coordinatewise fractional part; idempotent, constant on lattice orbits
TorusPoint project_to_torus(const LiftPoint& p);

enum class Smoothness { c1, c_infty_piecewise };

struct DiffeoSpec {
  std::function<Vec3(const Vec3&)> lift;
  std::function<Vec3(const Vec3&)> lift_inverse;
  std::function<Mat3(const Vec3&)> derivative;
  IntegerMatrix3 linear_part;
  Smoothness smoothness = Smoothness::c_infty_piecewise;

  // present for stack-built maps; enables serialization and reproducibility
  std::shared_ptr<const MapStack> stack;
  // spectrum of the base linear model, when family-based
  std::optional<LinearSpectrum> base_spectrum;
  // fixed point relevant to the construction (surgery center)
  std::optional<TorusPoint> fixed_point;

  Mat3 derivative_inverse(const Vec3& x) const { return derivative(x).inverse(); }

  nlohmann::json stack_json() const;
};

// Linear automorphism as a DiffeoSpec; attaches the spectrum when the matrix
// is hyperbolic with real spectrum.
DiffeoSpec linear_diffeo(const IntegerMatrix3& A);

// DiffeoSpec from a construction stack.
DiffeoSpec stack_diffeo(std::shared_ptr<const MapStack> stack,
                        std::optional<LinearSpectrum> base = std::nullopt,
                        std::optional<TorusPoint> fixed_point = std::nullopt);

// Homotopy data: integer matrix recovered from lattice displacements of the
// lift, verified independent of the base point. Throws Errc::not_a_torus_map
// if displacements are not integral (residual >= 0.1) or not constant.
IntegerMatrix3 linearization_of(const DiffeoSpec& f, int samples = 16);

// sup of the equivariance defect |lift(x+k) - lift(x) - A k| over samples
double equivariance_residual(const DiffeoSpec& f, int samples = 1000, uint64_t seed = 2);

// sup of |lift_inverse(lift(x)) - x| over samples
double inverse_consistency_residual(const DiffeoSpec& f, int samples = 1000, uint64_t seed = 3);

struct VolumeReport {
  double max_deviation = 0; // max |det Df - 1|
  TorusPoint worst_point;
  double tol = 0;
  bool pass = false;
};

// max |det Df(x) - 1| over quasi-random samples
VolumeReport volume_check(const DiffeoSpec& f, long samples, double tol, uint64_t seed = 4);

struct SemiconjugacyField {
  int grid = 0;                  // nodes per axis
  std::vector<Vec3> displacement; // u on the grid, h = id + u; periodic
  double residual = 0;           // sup |h(f x) - A h(x)| on validation samples
  int sweeps = 0;
  double contraction_estimate = 0; // measured per-sweep residual ratio

  Vec3 displacement_at(const Vec3& x) const; // trilinear, periodic
  Vec3 apply(const Vec3& x) const;           // h(x) = x + u(x)
};

// Solves h o f = A o h for h = id + u, u periodic, by coordinatewise
// geometric series along A's eigenbasis: backward orbit sums on expanding
// coordinates, forward on the contracting one. Convergence factor is
// max(1/beta_u, 1/beta_c, beta_s), so the center coordinate dominates the
// sweep count. Throws Errc::non_convergence if the residual stays above tol.
SemiconjugacyField semiconjugacy_solve(const DiffeoSpec& f, const IntegerMatrix3& A,
                                       int grid_resolution = 64, int max_sweeps = 400,
                                       double tol = 1e-8, int validation_samples = 10000);

} // namespace dalab
