#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndcp/aggregate.hpp"
#include "ndcp/dataset.hpp"
#include "ndcp/forest.hpp"
#include "ndcp/metrics.hpp"

namespace ndcp {

struct DatasetSpec {
  std::string path;
  std::string label_column;
  CategoricalEncoding encoding = CategoricalEncoding::OneHot;
  std::string name;  // labeling + seed key; defaults to the file stem
};

struct ScenarioSpec {
  std::string label;
  PartitionScheme scheme = PartitionScheme::Pooled;
  std::size_t k = 1;
  std::size_t min_size = 10;
  std::size_t draws = 1;  // independent size draws per repetition (Random)
};

/// Everything a full evaluation run needs. Every random stream below is
/// derived from master_seed keyed by dataset name and scenario label, so
/// adding a scenario or dataset never perturbs the others.
struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  double train_fraction = 0.8;
  std::vector<ScenarioSpec> scenarios;
  std::size_t repetitions = 5;
  ForestConfig forest;  // per-source seeds are derived; forest.seed is ignored
  ScoreDirection score_direction = ScoreDirection::Conventional;
  SignificanceGrid grid = SignificanceGrid::regular();
  std::size_t test_cap = 0;  // 0 = evaluate the full test set
  std::uint64_t master_seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency

  /// Pooled; Equal K in {2,4,6}; Random K in {2,4,6} with 5 size draws.
  static std::vector<ScenarioSpec> paper_scenarios();

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

struct ScenarioResult {
  std::string dataset;
  std::string scenario;  // declared label
  std::size_t scenario_index = 0;
  std::size_t repetition = 0;
  std::size_t draw = 0;
  MetricsReport ndcp;                   // scenario field holds the emitted row label
  std::vector<MetricsReport> small_tcp;  // one per source, same test set
};

struct TestSetPredictions {
  std::vector<PValuePair> aggregated;                // [test index]
  std::vector<std::vector<PValuePair>> per_source;   // [source][test index]
};

/// NDCP p-values for every row of `test`, test_index = row position.
/// Parallel over test objects; bit-identical to the serial run.
TestSetPredictions predict_test_set(const SourceEnsemble& ensemble, const Dataset& test,
                                    std::size_t threads);

/// Builds the per-source ensemble for one (dataset, scenario, repetition,
/// draw) cell with all seeds derived from the config's master seed.
SourceEnsemble build_ensemble(const Dataset& train, const ExperimentConfig& config,
                              const std::string& dataset_name, const ScenarioSpec& scenario,
                              std::size_t repetition, std::size_t draw);

/// Appends one ScenarioResult per (dataset, repetition, scenario, draw)
/// cell as it completes, so callers keep partial progress on failure.
void run_scenarios_into(const ExperimentConfig& config, std::vector<ScenarioResult>& results);

std::vector<ScenarioResult> run_scenarios(const ExperimentConfig& config);

/// Writes metrics.csv, calibration_<scenario>.csv per scenario, Wilcoxon
/// matrices for validity and efficiency, and run_manifest.json. Returns
/// the emitted paths.
std::vector<std::string> emit_reports(const ExperimentConfig& config,
                                      const std::vector<ScenarioResult>& results,
                                      const std::string& out_dir);

struct ExperimentOutput {
  std::vector<ScenarioResult> results;
  std::vector<std::string> files;
};

/// The full pipeline. A failing cell still emits everything computed so
/// far plus a partial_results.txt marker, then rethrows with (scenario,
/// repetition) context.
ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir);

/// Rebuilds the config echoed into a run manifest (for `replay`).
ExperimentConfig config_from_manifest(const std::string& manifest_path);

}  // namespace ndcp
