// Acceptance suite: one line per criterion, every tolerance pinned in code.
// Usage: dalab_acceptance [path-to-dalab-cli]
// The CLI path is only needed for the determinism criterion; it is skipped
// (and counted as a failure) when the path is missing.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dalab/experiments.hpp"
#include "dalab/foliation.hpp"
#include "dalab/parallel.hpp"
#include "dalab/rng.hpp"

using namespace dalab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("CRITERION %d %-4s %-28s %s (%.1fs)\n", id, pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

template <typename Fn>
void timed(int id, const std::string& name, Fn&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    pass = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, name, pass, detail, secs);
}

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

BoostCertification full_cert() {
  BoostCertification cert;
  cert.theta = 0.1;
  cert.cone_samples = 100000;
  cert.mc_budget = 100000;
  cert.tail = 24;
  cert.seed = 42;
  return cert;
}

const BuiltExample& certified_example() {
  static const BuiltExample ex =
      build_da_example(100, 3, BoostParams{}, SurgeryParams{}, full_cert());
  return ex;
}

SplittingField field_of(const DiffeoSpec& f, const LinearSpectrum& s, int tail) {
  SplittingField S;
  S.map = f;
  S.reference = s;
  S.tail = tail;
  return S;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. spectral asymptotics across the decades
bool criterion1(std::string& detail) {
  auto asym = [](int64_t n) {
    LinearSpectrum s = spectral_triple(family_inverse(n));
    return std::array<double, 3>{std::fabs(s.beta_u / n - 1), std::fabs(s.beta_c - 1),
                                 std::fabs(n * s.beta_s - 1)};
  };
  auto a10 = asym(10), a100 = asym(100), a1000 = asym(1000);
  bool monotone = true, small = true;
  for (int i = 0; i < 3; ++i) {
    monotone = monotone && a10[i] > a100[i] && a100[i] > a1000[i];
    small = small && a1000[i] < 0.01;
  }
  detail = "at n=1000: " + fmt(a1000[0]) + ", " + fmt(a1000[1]) + ", " + fmt(a1000[2]) +
           (monotone ? ", monotone" : ", NOT monotone");
  return monotone && small;
}

// 2. linear exactness of the estimators and the identity semiconjugacy
bool criterion2(std::string& detail) {
  DiffeoSpec f = linear_diffeo(family_inverse(100));
  LinearSpectrum s = *f.base_spectrum;
  HaltonSampler qmc(17, "acceptance-linear");
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    auto q = qr_exponents(f, s, {qmc.point(i)}, 100);
    worst = std::max({worst, std::fabs(q[0] - s.lambda_s), std::fabs(q[1] - s.lambda_c),
                      std::fabs(q[2] - s.lambda_u)});
  }
  SemiconjugacyField h = semiconjugacy_solve(f, family_inverse(100), 16, 20, 1e-12, 1000);
  detail = "qr defect " + fmt(worst) + ", identity-conjugacy residual " + fmt(h.residual);
  return worst < 1e-8 && h.residual == 0;
}

// 3. construction certification at n=100, j=3
bool criterion3(std::string& detail) {
  const BuiltExample& ex = certified_example();
  bool cones_ok = true;
  long samples = 0;
  for (const auto& c : ex.cones) {
    cones_ok = cones_ok && c.violations == 0;
    samples = c.samples;
  }
  Vec3 p = ex.surgery.fixed_point.v;
  Mat3 Dp = ex.map.derivative(p);
  int contracting = (norm(Dp * ex.spectrum.e_u) < 1) + (norm(Dp * ex.spectrum.e_c) < 1) +
                    (norm(Dp * ex.spectrum.e_s) < 1);
  bool homotopy = linearization_of(ex.map) == family_inverse(100);
  detail = "volume " + fmt(ex.volume_deviation) + ", equivariance " + fmt(ex.equivariance) +
           ", cones 0 violations/" + std::to_string(samples) + ", contracting dirs " +
           std::to_string(contracting) + ", linearization " + (homotopy ? "ok" : "CHANGED");
  return ex.volume_deviation <= 1e-6 && ex.equivariance <= 1e-9 && cones_ok &&
         contracting == 2 && homotopy;
}

// 4. exponent inequality at budget 1e6, persisting for j in {1,2,3}
bool criterion4(std::string& detail) {
  const BuiltExample& ex = certified_example();
  BoostCertification cert = full_cert();
  bool ok = true;
  std::string parts;
  for (int j : {1, 2, 3}) {
    DiffeoSpec gj = j == 3 ? ex.map
                           : fixed_point_surgery(ex.boosted, ex.surgery, ex.schedule, j, cert);
    SplittingField S = field_of(gj, ex.spectrum, 16);
    McResult mc = mc_center_integral(gj, S, 1000000, 42);
    bool sep = mc.mean - mc.ci95 > ex.spectrum.lambda_c;
    ok = ok && sep;
    parts += "j=" + std::to_string(j) + ": " + fmt(mc.mean) + "+-" + fmt(mc.ci95) + "  ";
  }
  detail = parts + "vs lambda_c " + fmt(ex.spectrum.lambda_c);
  return ok;
}

// 5. neighborhood schedule certified to depth >= 4 over 1e4 seeds
bool criterion5(std::string& detail) {
  const BuiltExample& ex = certified_example();
  const auto& sch = ex.schedule; // built with orbit_budget = 10000
  bool shrinking = true;
  for (size_t j = 0; j + 1 < sch.radii.size(); ++j)
    shrinking = shrinking && sch.radii[j + 1] < sch.radii[j] && 2 * sch.radii[j + 1] < 1.0 / (j + 2);
  detail = "certified depth " + std::to_string(sch.certified_depth) + ", radii down to " +
           fmt(sch.radii.back());
  return sch.certified_depth >= 4 && shrinking;
}

// 6. large-scale geometry: Q-hat stability and the joint growth bound
bool criterion6(std::string& detail) {
  const BuiltExample& ex = certified_example();
  SplittingField S = field_of(ex.map, ex.spectrum, 12);
  HaltonSampler qmc(23, "acceptance-leaves");
  std::vector<LeafSegment> leaves(100);
  parallel_for(100, 0, [&](int64_t i) {
    leaves[i] = integrate_center_leaf(ex.map, S, qmc.point(i), 8.0, 2e-3);
  });
  std::span<const LeafSegment> all(leaves);
  LargeScaleParams quarter = quasi_isometry_estimate(ex.map, all.subspan(0, 25), 1.5);
  LargeScaleParams whole = quasi_isometry_estimate(ex.map, all, 1.5);
  double drift = std::fabs(whole.Q_hat - quarter.Q_hat) / quarter.Q_hat;

  LargeScaleParams params = whole;
  params.epsilon = 0.2;
  long failures = 0;
  int used = 0;
  for (const auto& leaf : leaves) {
    if (norm(leaf.back() - leaf.front()) <= params.M_hat) continue;
    GrowthReport rep = leaf_growth_check(ex.map, leaf, 20, params, ex.spectrum.lambda_c);
    failures += rep.failures;
    ++used;
  }
  detail = "Q " + fmt(quarter.Q_hat) + "->" + fmt(whole.Q_hat) + " (drift " + fmt(drift) +
           "), growth failures " + std::to_string(failures) + "/" + std::to_string(used) +
           " segments, M " + fmt(params.M_hat);
  return drift < 0.05 && failures == 0 && used >= 80;
}

// 7. diagnostic end-to-end: consistent / signature / corollary control
bool criterion7(std::string& detail) {
  const BuiltExample& ex = certified_example();
  double margin = 0.25 * ex.spectrum.lambda_c;

  DiffeoSpec lin = linear_diffeo(family_inverse(100));
  SplittingField Sl = field_of(lin, ex.spectrum, 24);
  FoliatedBox lin_box = make_foliated_box(lin, Sl, {{0.125, 0.3, 0.7}}, 4, 4, 0.04, 0.3, 1e-2);
  LevelSetEstimate lin_est = level_set_fraction(lin, Sl, ex.spectrum.lambda_c, 10, 60, 400, 42);
  AcVerdict v_lin = ac_diagnostic(lin, Sl, lin_box, lin_est, ex.spectrum, margin);

  SplittingField S = field_of(ex.map, ex.spectrum, 12);
  FoliatedBox box = make_foliated_box(ex.map, S, {{0.125, 0.3, 0.7}}, 4, 4, 0.04, 0.3, 2e-3);
  LevelSetEstimate est =
      level_set_fraction(ex.map, S, ex.spectrum.lambda_c, 40, 400, 2000, 42);
  AcVerdict v_built = ac_diagnostic(ex.map, S, box, est, ex.spectrum, margin);

  LevelSetEstimate mixed = est;
  for (size_t i = 0; i < mixed.center_values.size(); ++i) {
    double mag = std::max(std::fabs(mixed.center_values[i]), 0.01);
    mixed.center_values[i] = (i % 2 ? -mag : mag);
  }
  AcVerdict v_mixed = ac_diagnostic(ex.map, S, box, mixed, ex.spectrum, margin);

  detail = std::string("linear ") + to_string(v_lin.flag) + ", built " +
           to_string(v_built.flag) + " (" + v_built.branch + ", frac " +
           fmt(v_built.frac_above) + "), control " + to_string(v_mixed.flag) + " (" +
           v_mixed.branch + ")";
  return v_lin.flag == AcFlag::consistent_with_ac &&
         v_built.flag == AcFlag::non_ac_signature && v_built.branch == "exponent-excess" &&
         v_mixed.flag == AcFlag::non_ac_signature && v_mixed.branch == "mixed-sign";
}

// 8. byte-identical outputs under identical config/seed, across thread counts
bool criterion8(std::string& detail, const std::string& cli) {
  if (cli.empty()) {
    detail = "CLI path not provided";
    return false;
  }
  fs::path base = fs::temp_directory_path() / "dalab_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);

  ExperimentConfig cfg;
  cfg.family_n = 100;
  cfg.seed = 42;
  cfg.samples_mc = 20000;
  cfg.samples_levelset = 100;
  cfg.horizon = 60;
  cfg.levelset_start = 10;
  cfg.cone_samples = 5000;
  cfg.refine_tail = 12;
  cfg.surgery_depth = 1;
  cfg.schedule_budget = 1500;
  cfg.schedule_depth = 2;
  cfg.boost_count = 2;
  cfg.boost_amplitude = 0.4;
  cfg.boost_check_budget = 30000;
  cfg.box_grid = 3;
  cfg.box_plaque_len = 0.25;

  cfg.threads = 1;
  cfg.save(base / "one.cfg");
  cfg.threads = 4;
  cfg.save(base / "four.cfg");

  auto run = [&](const std::string& cfg_file, const std::string& out) {
    std::string cmd = "\"" + cli + "\" reproduce-theorem-b --config " +
                      (base / cfg_file).string() + " --out " + (base / out).string() +
                      " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  int rc1 = run("one.cfg", "run1");
  int rc2 = run("four.cfg", "run2");

  std::vector<std::string> mismatched;
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(base / "run1")) {
    std::string name = entry.path().filename().string();
    std::string ext = entry.path().extension().string();
    if (ext != ".json" && ext != ".csv") continue;
    ++compared;
    if (slurp(entry.path()) != slurp(base / "run2" / name)) mismatched.push_back(name);
  }
  detail = "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", " +
           std::to_string(compared) + " files compared";
  if (!mismatched.empty()) {
    detail += ", mismatch:";
    for (const auto& m : mismatched) detail += " " + m;
  }
  return rc1 == 0 && rc2 == 0 && compared >= 3 && mismatched.empty();
}

} // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  timed(1, "spectral-asymptotics", criterion1);
  timed(2, "linear-exactness", criterion2);
  timed(3, "construction", criterion3);
  timed(4, "exponent-inequality", criterion4);
  timed(5, "neighborhood-schedule", criterion5);
  timed(6, "large-scale-geometry", criterion6);
  timed(7, "ac-diagnostic", criterion7);
  timed(8, "determinism", [&](std::string& d) { return criterion8(d, cli); });
  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all 8 criteria passed\n");
  return g_failures == 0 ? 0 : 1;
}
