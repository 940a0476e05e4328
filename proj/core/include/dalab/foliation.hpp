#pragma once

// Center-leaf geometry in the universal cover: fourth-order leaf
// integration, iterate growth against the joint upper bound, quasi-isometry
// constants, large-scale ratio checks against the linear model, foliated
// boxes, and the absolute-continuity diagnostic.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dalab/lyapunov.hpp"
#include "dalab/splitting.hpp"
#include "dalab/torus_dynamics.hpp"

namespace dalab {

struct LeafSegment {
  std::vector<Vec3> vertices;     // lift points along one center leaf, ordered
  std::vector<double> arclength;  // cumulative polyline length from vertices[0]
  double step = 0;                // integration step actually used
  double max_tangent_defect = 0;  // worst angle between step direction and the field

  double length() const { return arclength.empty() ? 0.0 : arclength.back(); }
  const Vec3& front() const { return vertices.front(); }
  const Vec3& back() const { return vertices.back(); }
};

// Integrates the unit center field through x, half the requested arclength in
// each direction, with RK4 steps. The step is halved (up to four times) until
// the tangent-angle tolerance holds. Throws Errc::numeric on an orientation
// flip along the way, with the location in the message.
LeafSegment integrate_center_leaf(const DiffeoSpec& f, const SplittingField& S, const Vec3& x,
                                  double arclength, double step = 1e-3,
                                  double angle_tol = 1e-6);

struct LargeScaleParams {
  double M_hat = 0;   // separation above which the ratio bounds hold
  double C = 1.5;     // ratio constant, > 1
  double epsilon = 0; // slack, typically C - 1
  double Q_hat = 1;   // quasi-isometry constant
  bool suspect_non_quasi_isometric = false;
};

struct GrowthReport {
  std::vector<double> lengths_k;        // |f^k(segment)|
  std::vector<double> endpoint_dists_k; // |f^k(a) - f^k(b)|
  bool upper_bound_ok = true;
  int k_max = 0;
  long failures = 0;
};

// Iterates the segment through the lift and verifies
// |f^k(a) - f^k(b)| <= (1+eps)^(2k) exp(k lambda_cA) |a - b| for k = 1..n.
// Requires endpoint separation above params.M_hat; asks for a longer segment
// otherwise.
GrowthReport leaf_growth_check(const DiffeoSpec& f, const LeafSegment& segment, int n,
                               const LargeScaleParams& params, double lambda_cA);

// Smallest Q with d_leaf <= Q d_cover + Q over sampled same-leaf pairs, and
// the separation threshold above which the one-step ratio against the
// linearization stays inside [1/C, C].
LargeScaleParams quasi_isometry_estimate(const DiffeoSpec& f, std::span<const LeafSegment> leaves,
                                         double C = 1.5);

struct RatioRow {
  double separation = 0;
  double ratio_f_vs_A = 0;   // |f^k x - f^k y| / |A^k x - A^k y|
  double ratio_A_growth = 0; // |A^k x - A^k y| / |x - y|
  bool ok = true;
};

struct RatioReport {
  std::vector<RatioRow> rows;
  long failures = 0;
  double min_ratio = 0, max_ratio = 0; // of ratio_f_vs_A over pairs beyond M_hat
};

// Verifies both two-sided bounds for pairs on sigma-leaves beyond M_hat:
// the f-vs-A ratio within [1/C, C] and the A-growth within
// (1+eps)^{+-1} exp(k lambda_sigma).
RatioReport large_scale_ratio_check(const DiffeoSpec& f, const IntegerMatrix3& A,
                                    std::span<const std::pair<Vec3, Vec3>> pairs, int k,
                                    const LargeScaleParams& params, double lambda_sigma);

struct FoliatedBox {
  std::vector<TorusPoint> base_grid; // nu x ns transversal nodes
  int nu = 0, ns = 0;
  std::vector<LeafSegment> plaques;  // one per node, fixed arclength
  double plaque_arclength = 0;
  double min_plaque_separation = 0;  // sampled over adjacent plaques
  bool plaques_cross_box = true;
};

// Transversal grid in the (e_u, e_s)-plane of the reference spectrum with a
// center plaque through every node.
FoliatedBox make_foliated_box(const DiffeoSpec& f, const SplittingField& S,
                              const TorusPoint& base, int nu, int ns, double extent,
                              double plaque_arclength, double step = 1e-3);

enum class AcFlag { consistent_with_ac, non_ac_signature, inconclusive };

struct HolonomyStats {
  double concentration = 1; // max/median of the per-cell transported area ratio
  double cv = 0;            // coefficient of variation of the area ratios
};

struct AcVerdict {
  AcFlag flag = AcFlag::inconclusive;
  std::string branch; // "exponent-excess" | "mixed-sign" | ""
  double threshold = 0;
  double mean = 0, ci95 = 0;
  double frac_above = 0, frac_pos = 0, frac_neg = 0;
  HolonomyStats holonomy;
  std::vector<double> histogram_edges, histogram_counts;

  nlohmann::json to_json() const;
};

// One-sided test of the non-absolute-continuity signature:
//  (a) center exponents exceed lambda_c(A) + margin on a sampled fraction
//      >= 0.5 with the mean interval separated above the threshold, or
//  (b) positive-volume fractions of both exponent signs.
// Absolute continuity itself is never certified; the holonomy statistic is
// descriptive evidence and does not flip the flag.
AcVerdict ac_diagnostic(const DiffeoSpec& f, const SplittingField& S, const FoliatedBox& box,
                        const LevelSetEstimate& exponent_data, const LinearSpectrum& spectrum,
                        double margin);

const char* to_string(AcFlag flag);

} // namespace dalab
