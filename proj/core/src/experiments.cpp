#include "dalab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dalab/errors.hpp"
#include "dalab/foliation.hpp"
#include "dalab/parallel.hpp"
#include "dalab/rng.hpp"

namespace dalab {

namespace {

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

struct KeyDef {
  const char* name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
T parse_num(const std::string& s, const char* key) {
  try {
    if constexpr (std::is_same_v<T, double>) return std::stod(s);
    else if constexpr (std::is_same_v<T, uint64_t>) return std::stoull(s);
    else if constexpr (std::is_same_v<T, int64_t>) return std::stoll(s);
    else if constexpr (std::is_same_v<T, long>) return std::stol(s);
    else return static_cast<T>(std::stoi(s));
  } catch (const std::exception&) {
    fail(Errc::config, std::string("config: bad value for '") + key + "': " + s);
  }
}

#define NUM_KEY(field)                                                              \
  KeyDef {                                                                          \
    #field,                                                                         \
        [](const ExperimentConfig& c) {                                             \
          if constexpr (std::is_floating_point_v<decltype(c.field)>)                \
            return fmt(c.field);                                                    \
          else                                                                      \
            return std::to_string(c.field);                                         \
        },                                                                          \
        [](ExperimentConfig& c, const std::string& v) {                             \
          c.field = parse_num<std::decay_t<decltype(c.field)>>(v, #field);          \
        }                                                                           \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> keys = {
      NUM_KEY(family_n), NUM_KEY(seed), NUM_KEY(threads), NUM_KEY(samples_mc),
      NUM_KEY(samples_levelset), NUM_KEY(horizon), NUM_KEY(levelset_start),
      NUM_KEY(cone_theta), NUM_KEY(cone_samples), NUM_KEY(refine_tail), NUM_KEY(volume_tol),
      NUM_KEY(equivariance_tol), NUM_KEY(residual_tol), NUM_KEY(margin_factor),
      NUM_KEY(surgery_depth), NUM_KEY(schedule_eps0), NUM_KEY(schedule_budget),
      NUM_KEY(schedule_depth), NUM_KEY(boost_count), NUM_KEY(boost_amplitude),
      NUM_KEY(boost_radius), NUM_KEY(boost_aspect), NUM_KEY(boost_plateau),
      NUM_KEY(boost_check_budget), NUM_KEY(leaf_segments), NUM_KEY(leaf_arclength),
      NUM_KEY(leaf_step), NUM_KEY(growth_k), NUM_KEY(growth_epsilon), NUM_KEY(qi_constant),
      NUM_KEY(box_grid), NUM_KEY(box_extent), NUM_KEY(box_plaque_len),
      KeyDef{"control", [](const ExperimentConfig& c) { return c.control; },
             [](ExperimentConfig& c, const std::string& v) {
               if (v != "none" && v != "mixed-sign")
                 fail(Errc::config, "config: control must be 'none' or 'mixed-sign'");
               c.control = v;
             }},
  };
  return keys;
}

#undef NUM_KEY

} // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::config, "config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    bool found = false;
    for (const KeyDef& k : key_table()) {
      if (key == k.name) {
        k.set(cfg, val);
        found = true;
        break;
      }
    }
    if (!found) fail(Errc::config, "config: unknown key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "# dalab experiment configuration\n";
  for (const KeyDef& k : key_table()) os << k.name << " = " << k.get(*this) << "\n";
  return os.str();
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(Errc::io, "config: cannot write " + path.string());
  out << serialize();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  // threads is an execution detail, not part of the experiment identity;
  // results are thread-count independent and manifests must compare equal
  for (const KeyDef& k : key_table())
    if (std::string_view(k.name) != "threads") j[k.name] = k.get(*this);
  return j;
}

nlohmann::json RunManifest::to_json() const {
  return {{"pipeline", pipeline},   {"version", version},
          {"config", config},       {"stack", stack},
          {"stages_completed", stages_completed},
          {"numbers", numbers},     {"iterate_counts", iterate_counts},
          {"verdict", verdict},     {"certified", certified},
          {"failure", failure}};
}

// ---------------------------------------------------------------------------
// pipelines

namespace {

BoostCertification make_cert(const ExperimentConfig& cfg) {
  BoostCertification cert;
  cert.theta = cfg.cone_theta;
  cert.cone_samples = cfg.cone_samples;
  cert.mc_budget = cfg.boost_check_budget;
  cert.tail = cfg.refine_tail;
  cert.seed = cfg.seed;
  cert.threads = cfg.threads;
  return cert;
}

BoostParams make_boost(const ExperimentConfig& cfg) {
  BoostParams b;
  b.count = cfg.boost_count;
  b.amplitude = cfg.boost_amplitude;
  b.radius = cfg.boost_radius;
  b.aspect = cfg.boost_aspect;
  b.plateau = cfg.boost_plateau;
  return b;
}

SurgeryParams make_surgery(const ExperimentConfig& cfg) {
  SurgeryParams s;
  s.eps0 = cfg.schedule_eps0;
  s.orbit_budget = cfg.schedule_budget;
  s.schedule_depth = cfg.schedule_depth;
  return s;
}

SplittingField make_field(const DiffeoSpec& f, const LinearSpectrum& ref, int tail = 60) {
  SplittingField S;
  S.map = f;
  S.reference = ref;
  S.tail = tail;
  return S;
}

nlohmann::json cone_table(const std::array<ConeReport, 4>& cones, double theta) {
  const char* names[4] = {"u", "s", "cu", "cs"};
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 4; ++i)
    rows.push_back({names[i], fmt(theta), cones[i].samples, cones[i].rays, cones[i].violations,
                    fmt(cones[i].min_margin)});
  return {{"columns", {"kind", "theta", "samples", "rays", "violations", "min_margin"}},
          {"rows", rows}};
}

void spectrum_pipeline(const ExperimentConfig& cfg, RunManifest& man) {
  std::vector<int64_t> ns = {5, 10, 20, 50, 100, 200, 500, 1000};
  if (std::find(ns.begin(), ns.end(), cfg.family_n) == ns.end()) {
    ns.push_back(cfg.family_n);
    std::sort(ns.begin(), ns.end());
  }
  nlohmann::json rows = nlohmann::json::array();
  bool ok = true;
  for (int64_t n : ns) {
    LinearSpectrum s = spectral_triple(family_inverse(n));
    LinearSpectrum sl = spectral_triple(family_matrix(n));
    // reciprocity between the two spectra and the exponent sum rule
    double rec = std::max({std::fabs(s.beta_u * sl.beta_s - 1.0),
                           std::fabs(s.beta_c * sl.beta_c - 1.0),
                           std::fabs(s.beta_s * sl.beta_u - 1.0)});
    double sum = std::fabs(s.lambda_s + s.lambda_c + s.lambda_u);
    ok = ok && family_matrix(n).det() == 1 && rec < 1e-10 && sum < 1e-10;
    rows.push_back({n, fmt(s.beta_s), fmt(s.beta_c), fmt(s.beta_u), fmt(s.lambda_s),
                    fmt(s.lambda_c), fmt(s.lambda_u), fmt(std::fabs(s.beta_u / n - 1)),
                    fmt(std::fabs(s.beta_c - 1)), fmt(std::fabs(n * s.beta_s - 1)),
                    fmt(linear_entropy(s))});
  }
  man.tables["spectrum"] = {
      {"columns", {"n", "beta_s", "beta_c", "beta_u", "lambda_s", "lambda_c", "lambda_u",
                   "asym_u", "asym_c", "asym_s", "entropy"}},
      {"rows", rows}};
  // asymptotic gaps must shrink through the decades
  auto asym = [&](int64_t n) {
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
  man.numbers["spectrum"] = {{"monotone", monotone}, {"limits_at_1000_below_0.01", small},
                             {"invariants_ok", ok}};
  man.stages_completed.push_back("spectrum");
  man.certified = ok && monotone && small;
  if (!man.certified) man.failure = "spectral asymptotics check failed";
}

BuiltExample build_pipeline(const ExperimentConfig& cfg, RunManifest& man) {
  BuiltExample ex =
      build_da_example(cfg.family_n, cfg.surgery_depth, make_boost(cfg), make_surgery(cfg),
                       make_cert(cfg));
  man.stack = ex.map.stack_json();
  man.stages_completed.insert(man.stages_completed.end(),
                              {"spectrum", "linear", "center_boost", "neighborhood_schedule",
                               "fixed_point_surgery", "certification"});

  Vec3 p = fract(ex.surgery.fixed_point.v);
  Mat3 Dp = ex.map.derivative(p);
  double stretch_u = norm(Dp * ex.spectrum.e_u);
  double stretch_c = norm(Dp * ex.spectrum.e_c);
  double stretch_s = norm(Dp * ex.spectrum.e_s);
  int contracting = (stretch_u < 1) + (stretch_c < 1) + (stretch_s < 1);
  bool homotopy_ok = linearization_of(ex.map) == family_inverse(cfg.family_n);

  man.numbers["build"] = {
      {"lambda_c", fmt(ex.spectrum.lambda_c)},
      {"alpha_n", fmt(ex.spectrum.alpha_n)},
      {"integral_before_boost", fmt(ex.integral_before_boost.mean)},
      {"integral_after_boost", fmt(ex.integral_after_boost.mean)},
      {"integral_after_boost_ci95", fmt(ex.integral_after_boost.ci95)},
      {"integral_after_surgery", fmt(ex.integral_after_surgery.mean)},
      {"integral_after_surgery_ci95", fmt(ex.integral_after_surgery.ci95)},
      {"volume_deviation", fmt(ex.volume_deviation)},
      {"equivariance_residual", fmt(ex.equivariance)},
      {"fixed_point_stretches", {fmt(stretch_u), fmt(stretch_c), fmt(stretch_s)}},
      {"contracting_directions_at_p", contracting},
      {"homotopy_preserved", homotopy_ok},
      {"schedule_certified_depth", ex.schedule.certified_depth},
      {"schedule_radii", ex.schedule.radii},
  };
  man.tables["cone_margins"] = cone_table(ex.cones, cfg.cone_theta);
  man.iterate_counts["mc_budget_internal"] = cfg.boost_check_budget;
  man.iterate_counts["cone_samples"] = cfg.cone_samples;
  man.iterate_counts["schedule_budget"] = cfg.schedule_budget;

  bool cones_ok = true;
  for (const auto& c : ex.cones) cones_ok = cones_ok && c.violations == 0;
  man.certified = ex.volume_deviation <= cfg.volume_tol &&
                  ex.equivariance <= cfg.equivariance_tol && contracting == 2 && homotopy_ok &&
                  cones_ok;
  if (!man.certified) man.failure = "construction certification failed";
  return ex;
}

LevelSetEstimate exponent_data(const ExperimentConfig& cfg, const BuiltExample& ex,
                               const SplittingField& S) {
  return level_set_fraction(ex.map, S, ex.spectrum.lambda_c, cfg.levelset_start, cfg.horizon,
                            cfg.samples_levelset, cfg.seed, cfg.threads);
}

void synthesize_mixed_sign(LevelSetEstimate& est) {
  // corollary-branch control: alternate the signs of the measured values so
  // the diagnostic sees both-sign fractions; deterministic by index
  for (size_t i = 0; i < est.center_values.size(); ++i) {
    double mag = std::max(std::fabs(est.center_values[i]), 0.01);
    est.center_values[i] = (i % 2 ? -mag : mag);
  }
}

nlohmann::json exponent_table(const LevelSetEstimate& est) {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < est.center_values.size(); ++i) {
    const Vec3& p = est.sample_points[i].v;
    rows.push_back({fmt(p[0]), fmt(p[1]), fmt(p[2]), est.horizon, "c",
                    fmt(est.center_values[i])});
  }
  return {{"columns", {"x0", "x1", "x2", "horizon", "sigma", "value"}}, {"rows", rows}};
}

nlohmann::json histogram_table(const AcVerdict& v) {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t b = 0; b + 1 < v.histogram_edges.size(); ++b)
    rows.push_back({fmt(v.histogram_edges[b]), fmt(v.histogram_edges[b + 1]),
                    v.histogram_counts[b]});
  return {{"columns", {"bin_lo", "bin_hi", "count"}}, {"rows", rows}};
}

void exponents_pipeline(const ExperimentConfig& cfg, RunManifest& man) {
  BuiltExample ex = build_pipeline(cfg, man);
  bool build_ok = man.certified;
  SplittingField S = make_field(ex.map, ex.spectrum, cfg.refine_tail);
  McResult mc = mc_center_integral(ex.map, S, cfg.samples_mc, cfg.seed, cfg.threads);
  LevelSetEstimate est = exponent_data(cfg, ex, S);
  auto qr = qr_exponents(ex.map, ex.spectrum, {{0.17, 0.39, 0.61}}, cfg.horizon);
  man.numbers["exponents"] = {
      {"mc_mean", fmt(mc.mean)},
      {"mc_ci95", fmt(mc.ci95)},
      {"mc_budget", mc.budget},
      {"levelset_threshold", fmt(est.threshold)},
      {"levelset_fraction", fmt(est.fraction)},
      {"qr_exponents", {fmt(qr[0]), fmt(qr[1]), fmt(qr[2])}},
  };
  man.tables["exponents"] = exponent_table(est);
  man.iterate_counts["mc_budget"] = cfg.samples_mc;
  man.iterate_counts["levelset_budget"] = cfg.samples_levelset;
  man.iterate_counts["horizon"] = cfg.horizon;
  man.stages_completed.push_back("exponents");
  man.certified = build_ok && (mc.mean - mc.ci95 > ex.spectrum.lambda_c) && est.fraction > 0;
  if (!man.certified && man.failure.empty()) man.failure = "exponent inequality not certified";
}

void leafgeom_pipeline(const ExperimentConfig& cfg, RunManifest& man) {
  BuiltExample ex = build_pipeline(cfg, man);
  bool build_ok = man.certified;
  SplittingField S = make_field(ex.map, ex.spectrum, std::min(cfg.refine_tail, 12));
  HaltonSampler qmc(cfg.seed, "leafgeom-seeds");
  std::vector<LeafSegment> leaves(cfg.leaf_segments);
  parallel_for(cfg.leaf_segments, cfg.threads, [&](int64_t i) {
    leaves[i] = integrate_center_leaf(ex.map, S, qmc.point(i), cfg.leaf_arclength, cfg.leaf_step);
  });
  LargeScaleParams qi = quasi_isometry_estimate(ex.map, leaves, cfg.qi_constant);
  qi.epsilon = cfg.growth_epsilon;

  long growth_failures = 0;
  nlohmann::json growth_rows = nlohmann::json::array();
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (norm(leaves[i].back() - leaves[i].front()) <= qi.M_hat) continue;
    GrowthReport rep = leaf_growth_check(ex.map, leaves[i], cfg.growth_k, qi,
                                         ex.spectrum.lambda_c);
    growth_failures += rep.failures;
    double sep0 = norm(leaves[i].back() - leaves[i].front());
    for (int k = 1; k <= rep.k_max; ++k) {
      double bound = std::pow(1.0 + qi.epsilon, 2 * k) * std::exp(k * ex.spectrum.lambda_c) * sep0;
      growth_rows.push_back({static_cast<long>(i), k, fmt(rep.endpoint_dists_k[k - 1]),
                             fmt(rep.lengths_k[k - 1]), fmt(bound),
                             rep.endpoint_dists_k[k - 1] <= bound});
    }
  }
  man.tables["growth"] = {
      {"columns", {"segment", "k", "endpoint_dist", "length", "bound", "ok"}},
      {"rows", growth_rows}};

  std::vector<std::pair<Vec3, Vec3>> pairs;
  for (const auto& leaf : leaves) pairs.emplace_back(leaf.front(), leaf.back());
  RatioReport ratio = large_scale_ratio_check(ex.map, family_inverse(cfg.family_n), pairs, 1, qi,
                                              ex.spectrum.lambda_c);

  man.numbers["leafgeom"] = {
      {"Q_hat", fmt(qi.Q_hat)},
      {"M_hat", fmt(qi.M_hat)},
      {"C", fmt(qi.C)},
      {"epsilon", fmt(qi.epsilon)},
      {"suspect_non_quasi_isometric", qi.suspect_non_quasi_isometric},
      {"growth_failures", growth_failures},
      {"growth_k", cfg.growth_k},
      {"ratio_failures", ratio.failures},
      {"ratio_min", fmt(ratio.min_ratio)},
      {"ratio_max", fmt(ratio.max_ratio)},
      {"segments", static_cast<long>(leaves.size())},
  };
  man.iterate_counts["leaf_segments"] = cfg.leaf_segments;
  man.stages_completed.push_back("leafgeom");
  man.certified = build_ok && growth_failures == 0 && ratio.failures == 0 &&
                  !qi.suspect_non_quasi_isometric;
  if (!man.certified && man.failure.empty()) man.failure = "leaf geometry check failed";
}

void acdiag_pipeline(const ExperimentConfig& cfg, RunManifest& man) {
  BuiltExample ex = build_pipeline(cfg, man);
  bool build_ok = man.certified;
  SplittingField S = make_field(ex.map, ex.spectrum, cfg.refine_tail);
  LevelSetEstimate est = exponent_data(cfg, ex, S);
  if (cfg.control == "mixed-sign") synthesize_mixed_sign(est);
  FoliatedBox box = make_foliated_box(ex.map, S, {{0.125, 0.3, 0.7}}, cfg.box_grid, cfg.box_grid,
                                      cfg.box_extent, cfg.box_plaque_len, cfg.leaf_step);
  double margin = cfg.margin_factor * ex.spectrum.lambda_c;
  AcVerdict v = ac_diagnostic(ex.map, S, box, est, ex.spectrum, margin);
  man.verdict = to_string(v.flag);
  man.numbers["acdiag"] = v.to_json();
  man.numbers["acdiag"]["margin"] = fmt(margin);
  man.numbers["acdiag"]["control"] = cfg.control;
  man.tables["exponents"] = exponent_table(est);
  man.tables["histogram"] = histogram_table(v);
  man.stages_completed.push_back("acdiag");
  man.certified = build_ok && v.flag != AcFlag::inconclusive;
  if (!man.certified && man.failure.empty()) man.failure = "diagnostic inconclusive";
}

void theorem_b_pipeline(const ExperimentConfig& cfg, RunManifest& man) {
  BuiltExample ex = build_pipeline(cfg, man);
  bool build_ok = man.certified;

  SplittingField S = make_field(ex.map, ex.spectrum, cfg.refine_tail);
  McResult mc = mc_center_integral(ex.map, S, cfg.samples_mc, cfg.seed, cfg.threads);
  bool integral_ok = mc.mean - mc.ci95 > ex.spectrum.lambda_c;
  man.numbers["integral"] = {{"mean", fmt(mc.mean)},
                             {"ci95", fmt(mc.ci95)},
                             {"budget", mc.budget},
                             {"lambda_c", fmt(ex.spectrum.lambda_c)},
                             {"separated_above_lambda_c", integral_ok}};
  man.iterate_counts["mc_budget"] = cfg.samples_mc;
  man.stages_completed.push_back("integral");

  LevelSetEstimate est = exponent_data(cfg, ex, S);
  FoliatedBox box = make_foliated_box(ex.map, S, {{0.125, 0.3, 0.7}}, cfg.box_grid, cfg.box_grid,
                                      cfg.box_extent, cfg.box_plaque_len, cfg.leaf_step);
  double margin = cfg.margin_factor * ex.spectrum.lambda_c;
  AcVerdict v = ac_diagnostic(ex.map, S, box, est, ex.spectrum, margin);
  man.verdict = to_string(v.flag);
  man.numbers["acdiag"] = v.to_json();
  man.numbers["acdiag"]["margin"] = fmt(margin);
  man.tables["exponents"] = exponent_table(est);
  man.tables["histogram"] = histogram_table(v);
  man.stages_completed.push_back("acdiag");

  man.certified = build_ok && integral_ok && v.flag == AcFlag::non_ac_signature;
  if (!man.certified && man.failure.empty()) man.failure = "theorem-b chain not certified";
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + p.string());
  out << text;
}

std::string csv_from_table(const nlohmann::json& table) {
  std::ostringstream os;
  const auto& cols = table.at("columns");
  for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i].get<std::string>();
  os << "\n";
  for (const auto& row : table.at("rows")) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      const auto& cell = row[i];
      if (cell.is_string()) os << cell.get<std::string>();
      else os << cell.dump();
    }
    os << "\n";
  }
  return os.str();
}

std::string summary_text(const RunManifest& man) {
  std::ostringstream os;
  os << "dalab " << man.version << " pipeline=" << man.pipeline << "\n";
  if (man.numbers.contains("build")) {
    const auto& b = man.numbers["build"];
    os << "lambda_c(A) = " << b["lambda_c"].get<std::string>() << "\n";
    os << "integral after boost    = " << b["integral_after_boost"].get<std::string>() << " +- "
       << b["integral_after_boost_ci95"].get<std::string>() << "\n";
    os << "integral after surgery  = " << b["integral_after_surgery"].get<std::string>() << " +- "
       << b["integral_after_surgery_ci95"].get<std::string>() << "\n";
    os << "volume deviation        = " << b["volume_deviation"].get<std::string>() << "\n";
    os << "equivariance residual   = " << b["equivariance_residual"].get<std::string>() << "\n";
    os << "contracting directions at fixed point = " << b["contracting_directions_at_p"]
       << "\n";
  }
  if (man.tables.contains("cone_margins")) {
    os << "cone margins (kind, violations, min_margin):\n";
    for (const auto& row : man.tables["cone_margins"]["rows"])
      os << "  " << row[0].get<std::string>() << "  " << row[4] << "  "
         << row[5].get<std::string>() << "\n";
  }
  if (man.numbers.contains("integral")) {
    const auto& i = man.numbers["integral"];
    os << "mc center integral = " << i["mean"].get<std::string>() << " +- "
       << i["ci95"].get<std::string>() << " vs lambda_c = " << i["lambda_c"].get<std::string>()
       << "  separated=" << i["separated_above_lambda_c"] << "\n";
  }
  if (!man.verdict.empty()) os << "verdict: " << man.verdict << "\n";
  os << (man.certified ? "certified: yes" : "certified: NO (" + man.failure + ")") << "\n";
  return os.str();
}

} // namespace

void emit_report(const RunManifest& man, const std::filesystem::path& out_dir,
                 const std::string& format) {
  std::filesystem::create_directories(out_dir);
  bool all = format == "all";
  if (all || format == "json") {
    write_text(out_dir / "manifest.json", man.to_json().dump(2) + "\n");
    nlohmann::json results = {{"pipeline", man.pipeline},
                              {"verdict", man.verdict},
                              {"certified", man.certified},
                              {"numbers", man.numbers}};
    write_text(out_dir / "results.json", results.dump(2) + "\n");
  }
  if (all || format == "csv") {
    for (const auto& [name, table] : man.tables.items())
      write_text(out_dir / (name + ".csv"), csv_from_table(table));
  }
  if (all || format == "summary") write_text(out_dir / "summary.txt", summary_text(man));
}

RunManifest run_experiment(const ExperimentConfig& cfg, const std::string& pipeline,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunManifest man;
  man.pipeline = pipeline;
  man.version = dalab_version();
  man.config = cfg.to_json();
  man.stack = nullptr;

  auto t0 = std::chrono::steady_clock::now();
  try {
    if (pipeline == "spectrum") spectrum_pipeline(cfg, man);
    else if (pipeline == "build") build_pipeline(cfg, man);
    else if (pipeline == "exponents") exponents_pipeline(cfg, man);
    else if (pipeline == "leafgeom") leafgeom_pipeline(cfg, man);
    else if (pipeline == "acdiag") acdiag_pipeline(cfg, man);
    else if (pipeline == "reproduce-theorem-b") theorem_b_pipeline(cfg, man);
    else fail(Errc::config, "unknown pipeline '" + pipeline + "'");
  } catch (const std::exception& e) {
    // persist what completed so a failed run identifies its last stage
    man.failure = e.what();
    emit_report(man, out_dir, "all");
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0).count();
    write_text(out_dir / "timing.txt", "wall_clock_ms " + std::to_string(ms) + "\n");
    throw;
  }
  emit_report(man, out_dir, "all");
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0).count();
  write_text(out_dir / "timing.txt", "wall_clock_ms " + std::to_string(ms) + "\n");
  return man;
}

} // namespace dalab
