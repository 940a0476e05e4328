#pragma once

// Shared fixtures: the certified example is expensive to construct, so unit
// tests build it once per binary with moderate budgets.

#include "dalab/perturbation.hpp"

namespace dalab::testing {

inline BoostCertification unit_cert() {
  BoostCertification cert;
  cert.theta = 0.1;
  cert.cone_samples = 20000;
  cert.mc_budget = 100000;
  cert.tail = 24;
  cert.seed = 42;
  return cert;
}

inline const BuiltExample& built_example_100() {
  static const BuiltExample ex = [] {
    BoostParams boost;
    SurgeryParams surgery;
    return build_da_example(100, 3, boost, surgery, unit_cert());
  }();
  return ex;
}

// a mildly twisted map at arbitrary n, for tests that do not need the full
// certified construction
inline DiffeoSpec mild_twist_map(int64_t n, double angle = 0.05, double aspect = 1.0) {
  LinearSpectrum sp = spectral_triple(family_inverse(n));
  MapStack stack = MapStack::from_linear(family_inverse(n));
  TwistLayer t;
  t.axis_u = 0;
  t.axis_c = 1;
  t.center_u = 0.5;
  t.center_c = 0.5;
  t.radius = 0.15;
  t.aspect = aspect;
  t.angle = angle;
  t.plateau = 0.55;
  stack.layers.push_back(t);
  return stack_diffeo(std::make_shared<MapStack>(std::move(stack)), sp, TorusPoint{{0, 0, 0}});
}

inline SplittingField field_of(const DiffeoSpec& f, int tail = 24) {
  SplittingField S;
  S.map = f;
  S.reference = *f.base_spectrum;
  S.tail = tail;
  return S;
}

} // namespace dalab::testing
