#include "dalab/foliation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dalab/errors.hpp"

namespace dalab {

namespace {

// unit center field with orientation matched to a carried direction
Vec3 center_dir(const SplittingField& S, const Vec3& y, const Vec3& carry, double flip_tol,
                const char* where) {
  Vec3 e = S.at(y).e_c;
  double d = dot(e, carry);
  if (std::fabs(d) < flip_tol) {
    std::ostringstream os;
    os << where << ": center orientation flip at [" << y[0] << "," << y[1] << "," << y[2]
       << "] (|cos|=" << std::fabs(d) << ")";
    fail(Errc::numeric, os.str());
  }
  return d < 0 ? -e : e;
}

struct HalfLeaf {
  std::vector<Vec3> pts;
  double max_defect = 0;
};

HalfLeaf integrate_half(const DiffeoSpec& /*f*/, const SplittingField& S, const Vec3& x0,
                        const Vec3& dir0, double arclength, double h) {
  HalfLeaf out;
  int steps = static_cast<int>(std::ceil(arclength / h));
  out.pts.reserve(steps);
  Vec3 y = x0;
  Vec3 carry = dir0;
  for (int i = 0; i < steps; ++i) {
    Vec3 k1 = center_dir(S, y, carry, 0.1, "integrate_center_leaf");
    Vec3 k2 = center_dir(S, y + (0.5 * h) * k1, k1, 0.1, "integrate_center_leaf");
    Vec3 k3 = center_dir(S, y + (0.5 * h) * k2, k1, 0.1, "integrate_center_leaf");
    Vec3 k4 = center_dir(S, y + h * k3, k1, 0.1, "integrate_center_leaf");
    Vec3 incr = (1.0 / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // step self-check: the chord must align with the field at its midpoint
    // (exact for constant curvature, second order otherwise)
    Vec3 mid_dir = center_dir(S, y + (0.5 * h) * incr, k1, 0.1, "integrate_center_leaf");
    out.max_defect = std::max(out.max_defect, line_angle(incr, mid_dir));
    y = y + h * incr;
    carry = k1;
    out.pts.push_back(y);
  }
  return out;
}

double polyline_length(const std::vector<Vec3>& v) {
  double L = 0;
  for (size_t i = 1; i < v.size(); ++i) L += norm(v[i] - v[i - 1]);
  return L;
}

} // namespace

LeafSegment integrate_center_leaf(const DiffeoSpec& f, const SplittingField& S, const Vec3& x,
                                  double arclength, double step, double angle_tol) {
  if (arclength <= 0) fail(Errc::precondition, "integrate_center_leaf: arclength must be > 0");
  Vec3 e0 = S.at(x).e_c;
  double h = step;
  for (int attempt = 0; attempt < 5; ++attempt) {
    HalfLeaf plus = integrate_half(f, S, x, e0, arclength / 2, h);
    HalfLeaf minus = integrate_half(f, S, x, -e0, arclength / 2, h);
    double defect = std::max(plus.max_defect, minus.max_defect);
    if (defect <= angle_tol || attempt == 4) {
      LeafSegment seg;
      seg.step = h;
      seg.max_tangent_defect = defect;
      seg.vertices.reserve(plus.pts.size() + minus.pts.size() + 1);
      for (auto it = minus.pts.rbegin(); it != minus.pts.rend(); ++it) seg.vertices.push_back(*it);
      seg.vertices.push_back(x);
      for (const Vec3& p : plus.pts) seg.vertices.push_back(p);
      seg.arclength.resize(seg.vertices.size());
      seg.arclength[0] = 0;
      for (size_t i = 1; i < seg.vertices.size(); ++i)
        seg.arclength[i] = seg.arclength[i - 1] + norm(seg.vertices[i] - seg.vertices[i - 1]);
      if (defect > angle_tol)
        fail(Errc::numeric, "integrate_center_leaf: tangent defect " + std::to_string(defect) +
                                " above tolerance after step refinement");
      return seg;
    }
    h *= 0.5;
  }
  fail(Errc::numeric, "integrate_center_leaf: unreachable");
}

GrowthReport leaf_growth_check(const DiffeoSpec& f, const LeafSegment& segment, int n,
                               const LargeScaleParams& params, double lambda_cA) {
  double sep0 = norm(segment.back() - segment.front());
  if (sep0 <= params.M_hat)
    fail(Errc::precondition,
         "leaf_growth_check: endpoint separation " + std::to_string(sep0) +
             " below M=" + std::to_string(params.M_hat) + "; integrate a longer segment");
  GrowthReport rep;
  rep.k_max = n;
  std::vector<Vec3> cur = segment.vertices;
  for (int k = 1; k <= n; ++k) {
    for (Vec3& v : cur) v = f.lift(v);
    rep.lengths_k.push_back(polyline_length(cur));
    double d = norm(cur.back() - cur.front());
    rep.endpoint_dists_k.push_back(d);
    double bound = std::pow(1.0 + params.epsilon, 2 * k) * std::exp(k * lambda_cA) * sep0;
    if (d > bound) {
      rep.upper_bound_ok = false;
      ++rep.failures;
    }
  }
  return rep;
}

LargeScaleParams quasi_isometry_estimate(const DiffeoSpec& f, std::span<const LeafSegment> leaves,
                                         double C) {
  if (!(C > 1)) fail(Errc::precondition, "quasi_isometry_estimate: C must be > 1");
  LargeScaleParams p;
  p.C = C;
  p.epsilon = C - 1;

  Mat3 A = f.linear_part.to_real();
  double qhat = 1.0;
  double worst_violating_sep = 0;
  double max_sep = 0;
  for (const LeafSegment& leaf : leaves) {
    size_t m = leaf.vertices.size();
    size_t stride = std::max<size_t>(1, m / 64); // subsample pairs
    for (size_t i = 0; i < m; i += stride)
      for (size_t j = i + stride; j < m; j += stride) {
        double dl = leaf.arclength[j] - leaf.arclength[i];
        double dc = norm(leaf.vertices[j] - leaf.vertices[i]);
        qhat = std::max(qhat, dl / (dc + 1.0));
        max_sep = std::max(max_sep, dc);
        if (dc > 0) {
          double r = norm(f.lift(leaf.vertices[j]) - f.lift(leaf.vertices[i])) /
                     norm(A * leaf.vertices[j] - A * leaf.vertices[i]);
          if (!(r >= 1.0 / C && r <= C)) worst_violating_sep = std::max(worst_violating_sep, dc);
        }
      }
  }
  p.Q_hat = qhat;
  p.M_hat = worst_violating_sep > 0 ? std::nextafter(worst_violating_sep, 1e300)
                                    : std::min(1.0, 0.05 * std::max(1.0, max_sep));
  p.suspect_non_quasi_isometric = p.M_hat >= max_sep && worst_violating_sep > 0;
  return p;
}

RatioReport large_scale_ratio_check(const DiffeoSpec& f, const IntegerMatrix3& A,
                                    std::span<const std::pair<Vec3, Vec3>> pairs, int k,
                                    const LargeScaleParams& params, double lambda_sigma) {
  if (k < 1) fail(Errc::precondition, "large_scale_ratio_check: k must be >= 1");
  Mat3 Ar = A.to_real();
  RatioReport rep;
  rep.min_ratio = 1e300;
  rep.max_ratio = 0;
  for (const auto& [x, y] : pairs) {
    double sep = norm(x - y);
    if (sep < params.M_hat) continue;
    Vec3 fx = x, fy = y, ax = x, ay = y;
    for (int i = 0; i < k; ++i) {
      fx = f.lift(fx);
      fy = f.lift(fy);
      ax = Ar * ax;
      ay = Ar * ay;
    }
    RatioRow row;
    row.separation = sep;
    row.ratio_f_vs_A = norm(fx - fy) / norm(ax - ay);
    row.ratio_A_growth = norm(ax - ay) / sep;
    double g = std::exp(k * lambda_sigma);
    bool ok1 = row.ratio_f_vs_A >= 1.0 / params.C && row.ratio_f_vs_A <= params.C;
    bool ok2 = row.ratio_A_growth >= g / (1.0 + params.epsilon) &&
               row.ratio_A_growth <= g * (1.0 + params.epsilon);
    row.ok = ok1 && ok2;
    if (!row.ok) ++rep.failures;
    rep.min_ratio = std::min(rep.min_ratio, row.ratio_f_vs_A);
    rep.max_ratio = std::max(rep.max_ratio, row.ratio_f_vs_A);
    rep.rows.push_back(row);
  }
  return rep;
}

FoliatedBox make_foliated_box(const DiffeoSpec& f, const SplittingField& S,
                              const TorusPoint& base, int nu, int ns, double extent,
                              double plaque_arclength, double step) {
  if (nu < 2 || ns < 2) fail(Errc::precondition, "make_foliated_box: grid must be at least 2x2");
  FoliatedBox box;
  box.nu = nu;
  box.ns = ns;
  box.plaque_arclength = plaque_arclength;
  const Vec3 du = S.reference.e_u, ds = S.reference.e_s;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < ns; ++j) {
      double a = (i / static_cast<double>(nu - 1) - 0.5) * extent;
      double b = (j / static_cast<double>(ns - 1) - 0.5) * extent;
      Vec3 node = base.v + a * du + b * ds;
      box.base_grid.push_back({fract(node)});
      box.plaques.push_back(integrate_center_leaf(f, S, node, plaque_arclength, step));
    }

  // disjointness at sampled resolution: adjacent plaques only (leaves cannot
  // cross, so neighbors bound the worst case)
  double min_sep = 1e300;
  auto plaque_dist = [&](const LeafSegment& a, const LeafSegment& b) {
    double best = 1e300;
    size_t sa = std::max<size_t>(1, a.vertices.size() / 24);
    size_t sb = std::max<size_t>(1, b.vertices.size() / 24);
    for (size_t i = 0; i < a.vertices.size(); i += sa)
      for (size_t j = 0; j < b.vertices.size(); j += sb)
        best = std::min(best, norm(a.vertices[i] - b.vertices[j]));
    return best;
  };
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < ns; ++j) {
      if (i + 1 < nu)
        min_sep = std::min(min_sep, plaque_dist(box.plaques[i * ns + j],
                                                box.plaques[(i + 1) * ns + j]));
      if (j + 1 < ns)
        min_sep = std::min(min_sep, plaque_dist(box.plaques[i * ns + j],
                                                box.plaques[i * ns + j + 1]));
    }
  box.min_plaque_separation = min_sep;

  // every plaque must span the box in the center direction
  for (size_t p = 0; p < box.plaques.size(); ++p) {
    const LeafSegment& pl = box.plaques[p];
    double lo = dot(pl.front() - box.base_grid[p].v, S.reference.e_c);
    double hi = dot(pl.back() - box.base_grid[p].v, S.reference.e_c);
    if (std::min(lo, hi) > -0.3 * plaque_arclength || std::max(lo, hi) < 0.3 * plaque_arclength)
      box.plaques_cross_box = false;
  }
  return box;
}

const char* to_string(AcFlag flag) {
  switch (flag) {
    case AcFlag::consistent_with_ac: return "CONSISTENT_WITH_AC";
    case AcFlag::non_ac_signature: return "NON_AC_SIGNATURE";
    case AcFlag::inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

nlohmann::json AcVerdict::to_json() const {
  return {{"flag", to_string(flag)},
          {"branch", branch},
          {"threshold", threshold},
          {"mean", mean},
          {"ci95", ci95},
          {"frac_above", frac_above},
          {"frac_pos", frac_pos},
          {"frac_neg", frac_neg},
          {"holonomy_concentration", holonomy.concentration},
          {"holonomy_cv", holonomy.cv},
          {"histogram_edges", histogram_edges},
          {"histogram_counts", histogram_counts}};
}

namespace {

HolonomyStats holonomy_statistic(const FoliatedBox& box) {
  // transported cell areas between the two endpoint transversals
  HolonomyStats st;
  if (box.nu < 2 || box.ns < 2) return st;
  auto quad_area = [&](const std::vector<Vec3>& pts, int i, int j, int ns) {
    const Vec3 &p00 = pts[i * ns + j], &p10 = pts[(i + 1) * ns + j], &p01 = pts[i * ns + j + 1];
    return norm(cross(p10 - p00, p01 - p00));
  };
  std::vector<Vec3> minus_side, plus_side;
  for (const auto& pl : box.plaques) {
    minus_side.push_back(pl.front());
    plus_side.push_back(pl.back());
  }
  std::vector<double> ratios;
  for (int i = 0; i + 1 < box.nu; ++i)
    for (int j = 0; j + 1 < box.ns; ++j) {
      double a0 = quad_area(minus_side, i, j, box.ns);
      double a1 = quad_area(plus_side, i, j, box.ns);
      if (a0 > 0) ratios.push_back(a1 / a0);
    }
  if (ratios.empty()) return st;
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[sorted.size() / 2];
  double mx = sorted.back();
  st.concentration = median > 0 ? mx / median : 1.0;
  double mean = 0;
  for (double r : ratios) mean += r;
  mean /= ratios.size();
  double var = 0;
  for (double r : ratios) var += (r - mean) * (r - mean);
  st.cv = mean > 0 ? std::sqrt(var / ratios.size()) / mean : 0;
  return st;
}

} // namespace

AcVerdict ac_diagnostic(const DiffeoSpec& /*f*/, const SplittingField& /*S*/,
                        const FoliatedBox& box, const LevelSetEstimate& exponent_data,
                        const LinearSpectrum& spectrum, double margin) {
  if (exponent_data.center_values.empty())
    fail(Errc::precondition, "ac_diagnostic: exponent data carries no samples");
  if (!(margin >= 0)) fail(Errc::precondition, "ac_diagnostic: margin must be >= 0");

  const std::vector<double>& vals = exponent_data.center_values;
  long n = static_cast<long>(vals.size());
  AcVerdict v;
  v.threshold = spectrum.lambda_c + margin;

  double mean = 0;
  for (double x : vals) mean += x;
  mean /= n;
  double var = 0;
  for (double x : vals) var += (x - mean) * (x - mean);
  double sd = std::sqrt(var / std::max<long>(1, n - 1));
  v.mean = mean;
  v.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(n));

  long above = 0, pos = 0, neg = 0;
  for (double x : vals) {
    if (x > v.threshold) ++above;
    if (x > 0) ++pos;
    if (x < 0) ++neg;
  }
  v.frac_above = static_cast<double>(above) / n;
  v.frac_pos = static_cast<double>(pos) / n;
  v.frac_neg = static_cast<double>(neg) / n;

  // Wilson lower bound at 95%, to call a fraction positive with confidence
  auto wilson_lb = [n](double frac) {
    double z = 1.96, z2 = z * z;
    double denom = 1 + z2 / n;
    double center = frac + z2 / (2 * n);
    double rad = z * std::sqrt(frac * (1 - frac) / n + z2 / (4.0 * n * n));
    return (center - rad) / denom;
  };

  v.holonomy = holonomy_statistic(box);

  // histogram evidence
  double lo = *std::min_element(vals.begin(), vals.end());
  double hi = *std::max_element(vals.begin(), vals.end());
  if (hi <= lo) hi = lo + 1e-12;
  const int bins = 32;
  v.histogram_edges.resize(bins + 1);
  v.histogram_counts.assign(bins, 0);
  for (int b = 0; b <= bins; ++b) v.histogram_edges[b] = lo + (hi - lo) * b / bins;
  for (double x : vals) {
    int b = std::min<int>(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins));
    v.histogram_counts[b] += 1;
  }

  bool branch_a = v.frac_above >= 0.5 && (v.mean - v.ci95 > v.threshold);
  bool branch_b = wilson_lb(v.frac_pos) > 0.01 && wilson_lb(v.frac_neg) > 0.01;
  if (branch_a) {
    v.flag = AcFlag::non_ac_signature;
    v.branch = "exponent-excess";
  } else if (branch_b) {
    v.flag = AcFlag::non_ac_signature;
    v.branch = "mixed-sign";
  } else if (v.mean + v.ci95 > v.threshold) {
    v.flag = AcFlag::inconclusive; // interval straddles the threshold
  } else {
    v.flag = AcFlag::consistent_with_ac;
  }
  return v;
}

} // namespace dalab
