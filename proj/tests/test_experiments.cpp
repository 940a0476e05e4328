#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dalab/errors.hpp"
#include "dalab/experiments.hpp"
#include "dalab/lyapunov.hpp"
#include "test_fixtures.hpp"

using namespace dalab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// budgets small enough for unit tests, boost strong enough for separated
// certification intervals at those budgets
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.family_n = 100;
  cfg.seed = 7;
  cfg.samples_mc = 30000;
  cfg.samples_levelset = 50;
  cfg.horizon = 30;
  cfg.levelset_start = 5;
  cfg.cone_samples = 5000;
  cfg.refine_tail = 12;
  cfg.surgery_depth = 1;
  cfg.schedule_budget = 1000;
  cfg.schedule_depth = 2;
  cfg.boost_count = 2;
  cfg.boost_amplitude = 0.4;
  cfg.boost_check_budget = 30000;
  cfg.leaf_segments = 6;
  cfg.leaf_arclength = 5.0;
  cfg.leaf_step = 2e-3;
  cfg.growth_k = 8;
  cfg.box_grid = 3;
  cfg.box_plaque_len = 0.25;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "dalab_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("config round-trips losslessly through its text format") {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.seed = 123456789123ull;
  cfg.boost_amplitude = 0.1 + 1e-17; // exercises full double precision
  cfg.margin_factor = 1.0 / 3.0;
  std::string text = cfg.serialize();
  ExperimentConfig back = ExperimentConfig::parse(text);
  CHECK(back.serialize() == text);
  CHECK(back.margin_factor == cfg.margin_factor);
  CHECK(back.seed == cfg.seed);

  fs::path p = fresh_dir("config") / "cfg.txt";
  cfg.save(p);
  CHECK(ExperimentConfig::load(p).serialize() == text);
}

TEST_CASE("unknown or malformed config keys are errors") {
  CHECK_THROWS_AS(ExperimentConfig::parse("no_such_key = 3\n"), Error);
  CHECK_THROWS_AS(ExperimentConfig::parse("family_n == 3\n"), Error);
  CHECK_THROWS_AS(ExperimentConfig::parse("family_n = notanumber\n"), Error);
  CHECK_THROWS_AS(ExperimentConfig::parse("control = maybe\n"), Error);
  // comments and blank lines are fine
  ExperimentConfig ok = ExperimentConfig::parse("# comment\n\nfamily_n = 12 # trailing\n");
  CHECK(ok.family_n == 12);
}

TEST_CASE("spectrum pipeline is certified and byte-deterministic") {
  ExperimentConfig cfg = tiny_config();
  fs::path d1 = fresh_dir("spec1"), d2 = fresh_dir("spec2");
  RunManifest m1 = run_experiment(cfg, "spectrum", d1);
  RunManifest m2 = run_experiment(cfg, "spectrum", d2);
  CHECK(m1.certified);
  CHECK(m2.certified);
  for (const char* f : {"manifest.json", "results.json", "spectrum.csv", "summary.txt"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("estimators are bitwise thread-count independent") {
  DiffeoSpec f = dalab::testing::mild_twist_map(100, 0.3, 0.5);
  SplittingField S = dalab::testing::field_of(f, 12);
  McResult one = mc_center_integral(f, S, 4000, 5, 1);
  McResult four = mc_center_integral(f, S, 4000, 5, 4);
  CHECK(one.mean == four.mean);
  CHECK(one.ci95 == four.ci95);
  LevelSetEstimate a = level_set_fraction(f, S, 0.01, 3, 20, 300, 5, 1);
  LevelSetEstimate b = level_set_fraction(f, S, 0.01, 3, 20, 300, 5, 4);
  CHECK(a.fraction == b.fraction);
  CHECK(a.center_values == b.center_values);
}

TEST_CASE("exponents pipeline writes one csv row per sample") {
  ExperimentConfig cfg = tiny_config();
  fs::path dir = fresh_dir("exponents");
  RunManifest man = run_experiment(cfg, "exponents", dir);
  std::string csv = slurp(dir / "exponents.csv");
  long rows = std::count(csv.begin(), csv.end(), '\n') - 1; // header
  CHECK(rows == cfg.samples_levelset);
  CHECK(man.numbers.contains("exponents"));
}

TEST_CASE("acdiag pipeline: verdict present, mixed-sign control flips the branch") {
  ExperimentConfig cfg = tiny_config();
  cfg.samples_levelset = 120;
  cfg.horizon = 120;
  cfg.levelset_start = 20;
  fs::path dir = fresh_dir("acdiag");
  RunManifest man = run_experiment(cfg, "acdiag", dir);
  CHECK(!man.verdict.empty());

  cfg.control = "mixed-sign";
  RunManifest ctl = run_experiment(cfg, "acdiag", fresh_dir("acdiag_ctl"));
  CHECK(ctl.verdict == "NON_AC_SIGNATURE");
  CHECK(ctl.numbers["acdiag"]["branch"] == "mixed-sign");
}

TEST_CASE("failed runs persist a manifest naming the completed stages") {
  ExperimentConfig cfg = tiny_config();
  cfg.boost_amplitude = 1.4; // certain cone rejection
  fs::path dir = fresh_dir("failed");
  CHECK_THROWS_AS(run_experiment(cfg, "build", dir), Error);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["failure"].get<std::string>().find("center_boost") != std::string::npos);
  CHECK(manifest["stages_completed"].is_array());
}

TEST_CASE("manifest json carries the documented schema") {
  ExperimentConfig cfg = tiny_config();
  fs::path dir = fresh_dir("schema");
  run_experiment(cfg, "spectrum", dir);
  auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  for (const char* key : {"pipeline", "version", "config", "stack", "stages_completed",
                          "numbers", "iterate_counts", "verdict", "certified", "failure"})
    CHECK(m.contains(key));
  CHECK(m["pipeline"].is_string());
  CHECK(m["certified"].is_boolean());
  CHECK(m["config"].is_object());
  auto r = nlohmann::json::parse(slurp(dir / "results.json"));
  for (const char* key : {"pipeline", "verdict", "certified", "numbers"}) CHECK(r.contains(key));
}

TEST_CASE("unknown pipeline is a config error") {
  ExperimentConfig cfg = tiny_config();
  CHECK_THROWS_AS(run_experiment(cfg, "no-such-pipeline", fresh_dir("nope")), Error);
}
