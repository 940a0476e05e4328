#pragma once

// Reproducible experiment driver. A flat key=value configuration plus one
// master seed determines every output byte; wall-clock goes to a separate
// timing file so result files stay comparable across runs and thread counts.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalab/perturbation.hpp"

namespace dalab {

struct ExperimentConfig {
  int64_t family_n = 100;
  uint64_t seed = 42;
  int threads = 0; // 0 = hardware concurrency; results do not depend on it

  long samples_mc = 1000000;
  long samples_levelset = 2000;
  int horizon = 400;
  int levelset_start = 40;

  double cone_theta = 0.1;
  long cone_samples = 100000;
  // orbit tail for field refinement in the estimators; the certification
  // field keeps the 60-step default and the doubled-tail oracle guards both
  int refine_tail = 24;

  double volume_tol = 1e-6;
  double equivariance_tol = 1e-9;
  double residual_tol = 1e-6;
  double margin_factor = 0.25; // ac margin = margin_factor * lambda_c(A)

  int surgery_depth = 3;
  double schedule_eps0 = 0.05;
  long schedule_budget = 10000;
  int schedule_depth = 5;

  int boost_count = 3;
  double boost_amplitude = 0.35;
  double boost_radius = 0.16;
  double boost_aspect = 0.42;
  double boost_plateau = 0.55;
  long boost_check_budget = 100000;

  long leaf_segments = 100;
  double leaf_arclength = 8.0;
  double leaf_step = 1e-3;
  int growth_k = 20;
  double growth_epsilon = 0.2;
  double qi_constant = 1.5;

  int box_grid = 6;
  double box_extent = 0.05;
  double box_plaque_len = 0.4;

  std::string control = "none"; // none | mixed-sign (corollary-branch control)

  static ExperimentConfig defaults() { return {}; }
  // Flat key=value text. Unknown keys are errors; doubles round-trip
  // losslessly. Grammar: one `key = value` per line, '#' comments.
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig parse(const std::string& text);
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  nlohmann::json to_json() const;
};

struct RunManifest {
  std::string pipeline;
  std::string version;
  nlohmann::json config;
  nlohmann::json stack;  // construction record, null for linear-only runs
  std::vector<std::string> stages_completed;
  nlohmann::json numbers;        // key scalars per stage
  nlohmann::json iterate_counts; // deterministic work counters
  std::string verdict;           // "" when the pipeline has none
  bool certified = false;
  std::string failure; // certified-failure reason, if any

  // bulky deterministic data destined for CSV files
  nlohmann::json tables;

  nlohmann::json to_json() const; // without tables
};

// Executes one pipeline: spectrum | build | exponents | leafgeom | acdiag |
// reproduce-theorem-b. Writes manifest + reports into out_dir (created if
// missing). On an error the manifest with the completed stages is persisted
// before the exception propagates.
RunManifest run_experiment(const ExperimentConfig& config, const std::string& pipeline,
                           const std::filesystem::path& out_dir);

// Writes manifest.json, results.json, per-pipeline CSV tables and a
// plain-text summary. format: "json" | "csv" | "summary" | "all".
void emit_report(const RunManifest& manifest, const std::filesystem::path& out_dir,
                 const std::string& format = "all");

inline const char* dalab_version() { return "0.1.0"; }

} // namespace dalab
