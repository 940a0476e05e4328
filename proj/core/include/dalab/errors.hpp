#pragma once

#include <stdexcept>
#include <string>

namespace dalab {

enum class Errc {
  not_hyperbolic,         // complex, repeated, or unit-modulus spectrum
  not_a_torus_map,        // displacement not integer-equivariant
  rejected_perturbation,  // cone or window certification failed after a build step
  non_convergence,        // iteration exhausted without reaching tolerance
  precondition,           // caller violated an operation precondition
  config,                 // malformed or unknown configuration
  io,                     // unreadable/unwritable path
  numeric,                // root finder or integrator failure
};

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace dalab
