#pragma once

// Construction stack for volume-preserving torus diffeomorphisms.
//
// A map is a linear automorphism pre-composed with a list of compactly
// supported, identity-homotopic layers: g = A o layer_k o ... o layer_1.
// Every layer has unit Jacobian determinant identically and a closed-form
// inverse, so composed maps are exactly conservative and exactly invertible;
// no quantity here depends on an ODE tolerance.
//
// TwistLayer: rotation of an elliptic disc in a coordinate plane by a radial
// angle profile, extended as a cylinder along the remaining axis. The radial
// dependence of the angle keeps the Jacobian unimodular; the aspect parameter
// conjugates by diag(mu, 1/mu) to shape the off-diagonal couplings.
//
// SqueezeLayer: ball-supported center/stable squeeze around a fixed point,
// realized as N implicit-midpoint steps of the Hamiltonian field of
// H = -xi_c xi_s chi(|w|^2/r^2) in the eigenbasis. The midpoint Jacobian is a
// Cayley transform of a trace-free block, so its determinant is exactly one,
// and the step size is chosen so the derivative at the fixed point hits the
// prescribed eigenvalue factor kappa exactly.

#include <memory>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dalab/linalg.hpp"
#include "dalab/linear_anosov.hpp"

namespace dalab {

// C-infinity step: 1 on (-inf, lo], 0 on [hi, inf). value/d/d2 with respect
// to the raw argument.
struct SmoothStep {
  double lo, hi;
  void eval(double t, double& v, double& d1, double& d2) const;
};

struct TwistLayer {
  int axis_u = 0, axis_c = 1;     // twist plane (cylinder runs along the third axis)
  double center_u = 0.5, center_c = 0.5;
  double radius = 0.16;           // radius of the disc in conjugated coordinates
  double aspect = 0.42;           // mu; support is an ellipse with semi-axes (r*mu, r/mu)
  double angle = 0.35;            // maximal rotation angle
  double plateau = 0.55;          // fraction of the radius rotated by the full angle

  Vec3 apply(const Vec3& x, int dir) const;
  Vec3 apply_with_jacobian(const Vec3& x, int dir, Mat3& J) const;

  // semi-axis along the stretched direction; must stay below 1/2
  double major_semi_axis() const { return radius / aspect; }

  nlohmann::json to_json() const;
  static TwistLayer from_json(const nlohmann::json& j);
};

struct SqueezeLayer {
  Vec3 fixed_point{0, 0, 0};
  double radius = 0.03;  // support ball radius around the fixed point
  double kappa = 1.0;    // stable direction stretched by kappa, center contracted by 1/kappa
  int steps = 16;
  Mat3 basis;            // columns e_u, e_c, e_s
  Mat3 basis_inverse;

  void finalize(); // derives the per-step size from kappa and steps

  Vec3 apply(const Vec3& x, int dir) const;
  Vec3 apply_with_jacobian(const Vec3& x, int dir, Mat3& J) const;

  nlohmann::json to_json() const;
  static SqueezeLayer from_json(const nlohmann::json& j);

  // field of H in eigen coordinates; fills DX when requested
  Vec3 field(const Vec3& xi, Mat3* DX) const;

private:
  double h_ = 0;
  Vec3 run(const Vec3& x, int dir, Mat3* J) const;
};

using Layer = std::variant<TwistLayer, SqueezeLayer>;

struct MapStack {
  IntegerMatrix3 linear_int;
  Mat3 linear, linear_inverse;
  std::vector<Layer> layers; // applied in order, then the linear map

  static MapStack from_linear(const IntegerMatrix3& A);

  Vec3 lift(const Vec3& x) const;
  Vec3 lift_inverse(const Vec3& y) const;
  Mat3 derivative(const Vec3& x) const;

  nlohmann::json to_json() const;
  static MapStack from_json(const nlohmann::json& j);
};

} // namespace dalab
