#include "dalab/lyapunov.hpp"

#include <cmath>
#include <sstream>

#include "dalab/errors.hpp"
#include "dalab/parallel.hpp"
#include "dalab/rng.hpp"

namespace dalab {

namespace {

int sigma_index(char sigma) {
  switch (sigma) {
    case 's': return 0;
    case 'c': return 1;
    case 'u': return 2;
  }
  fail(Errc::precondition, std::string("unknown bundle tag '") + sigma + "'");
}

} // namespace

std::array<double, 3> finite_time_exponents(const DiffeoSpec& f, const SplittingField& S,
                                            const TorusPoint& x, int n) {
  if (n < 1) fail(Errc::precondition, "finite_time_exponent: horizon must be >= 1");
  Vec3 p = x.v;
  double acc_s = 0, acc_c = 0, acc_u = 0;
  for (int k = 0; k < n; ++k) {
    SplittingFrame fr = S.at(p);
    Mat3 J = f.derivative(p);
    acc_s += std::log(norm(J * fr.e_s));
    acc_c += std::log(norm(J * fr.e_c));
    acc_u += std::log(norm(J * fr.e_u));
    p = f.lift(p);
  }
  return {acc_s / n, acc_c / n, acc_u / n};
}

ExponentEstimate finite_time_exponent(const DiffeoSpec& f, const SplittingField& S,
                                      const TorusPoint& x, int n, char sigma) {
  auto v = finite_time_exponents(f, S, x, n);
  ExponentEstimate e;
  e.point = x;
  e.horizon = n;
  e.sigma = sigma;
  e.value = v[sigma_index(sigma)];
  if (!std::isfinite(e.value)) fail(Errc::numeric, "finite_time_exponent: non-finite value");
  return e;
}

std::array<double, 3> qr_exponents(const DiffeoSpec& f, const LinearSpectrum& reference,
                                   const TorusPoint& x, int horizon) {
  // orthonormal frame seeded on (e_u, e_c, e_s); log r_ii averages converge
  // to the exponents in dominance order
  Vec3 q1 = normalized(reference.e_u);
  Vec3 q2 = reference.e_c - dot(reference.e_c, q1) * q1;
  q2 = normalized(q2);
  Vec3 q3 = reference.e_s - dot(reference.e_s, q1) * q1 - dot(reference.e_s, q2) * q2;
  q3 = normalized(q3);
  Vec3 p = x.v;
  double l1 = 0, l2 = 0, l3 = 0;
  for (int k = 0; k < horizon; ++k) {
    Mat3 J = f.derivative(p);
    Vec3 z1 = J * q1, z2 = J * q2, z3 = J * q3;
    double r11 = norm(z1);
    q1 = (1.0 / r11) * z1;
    z2 = z2 - dot(z2, q1) * q1;
    double r22 = norm(z2);
    q2 = (1.0 / r22) * z2;
    z3 = z3 - dot(z3, q1) * q1 - dot(z3, q2) * q2;
    double r33 = norm(z3);
    q3 = (1.0 / r33) * z3;
    l1 += std::log(r11);
    l2 += std::log(r22);
    l3 += std::log(r33);
    p = f.lift(p);
  }
  return {l3 / horizon, l2 / horizon, l1 / horizon};
}

McResult mc_center_integral(const DiffeoSpec& f, const SplittingField& S, long budget,
                            uint64_t seed, int threads) {
  HaltonSampler qmc(seed, "mc-center-integral");
  std::vector<double> vals(budget);
  parallel_for(budget, threads, [&](int64_t i) {
    Vec3 x = qmc.point(i);
    SplittingFrame fr = S.at(x);
    vals[i] = std::log(norm(f.derivative(x) * fr.e_c));
  });
  double s1 = 0;
  for (double v : vals) s1 += v;
  double mean = s1 / budget;
  double s2 = 0;
  for (double v : vals) s2 += (v - mean) * (v - mean);
  double sd = std::sqrt(s2 / std::max<long>(1, budget - 1));
  McResult r;
  r.mean = mean;
  r.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(budget));
  r.budget = budget;
  return r;
}

LevelSetEstimate level_set_fraction(const DiffeoSpec& f, const SplittingField& S,
                                    double threshold, int start_n, int horizon, long budget,
                                    uint64_t seed, int threads) {
  if (start_n < 1 || horizon < start_n)
    fail(Errc::precondition, "level_set_fraction: need 1 <= start_n <= horizon");
  HaltonSampler qmc(seed, "level-set");
  LevelSetEstimate est;
  est.threshold = threshold;
  est.start_n = start_n;
  est.horizon = horizon;
  est.sample_count = budget;
  est.center_values.resize(budget);
  est.sample_points.resize(budget);
  std::vector<char> member(budget);
  parallel_for(budget, threads, [&](int64_t i) {
    Vec3 p = qmc.point(i);
    est.sample_points[i] = {p};
    double acc = 0;
    bool ok = true;
    Vec3 q = p;
    for (int k = 1; k <= horizon; ++k) {
      SplittingFrame fr = S.at(q);
      acc += std::log(norm(f.derivative(q) * fr.e_c));
      q = f.lift(q);
      if (k >= start_n && acc < k * threshold) ok = false;
    }
    member[i] = ok ? 1 : 0;
    est.center_values[i] = acc / horizon;
  });
  long cnt = 0;
  for (char m : member) cnt += m;
  est.fraction = static_cast<double>(cnt) / static_cast<double>(budget);
  return est;
}

double sum_rule_angle_bound(const SplittingField& S, const TorusPoint& x, int n) {
  // exact defect is (1/n)(log V(x) - log V(f^n x)) with V the frame volume
  auto frame_volume = [&](const Vec3& p) {
    SplittingFrame fr = S.at(p);
    return std::fabs(Mat3::from_columns(fr.e_u, fr.e_c, fr.e_s).det());
  };
  Vec3 p = x.v;
  for (int k = 0; k < n; ++k) p = S.map.lift(p);
  double v0 = frame_volume(x.v), vn = frame_volume(p);
  return (std::fabs(std::log(v0)) + std::fabs(std::log(vn))) / n;
}

std::string exponent_csv_header() { return "x0,x1,x2,horizon,sigma,value"; }

std::string exponent_csv_row(const ExponentEstimate& e) {
  std::ostringstream os;
  os.precision(17);
  os << e.point.v[0] << ',' << e.point.v[1] << ',' << e.point.v[2] << ',' << e.horizon << ','
     << e.sigma << ',' << e.value;
  return os.str();
}

} // namespace dalab
