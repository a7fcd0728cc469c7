#include "ndcp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "ndcp/error.hpp"
#include "ndcp/log.hpp"
#include "ndcp/seed.hpp"
#include "ndcp/toml_lite.hpp"

namespace ndcp {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string scheme_name(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::Pooled: return "pooled";
    case PartitionScheme::Equal: return "equal";
    case PartitionScheme::Random: return "random";
  }
  return "?";
}

PartitionScheme scheme_from_name(const std::string& name) {
  if (name == "pooled") return PartitionScheme::Pooled;
  if (name == "equal") return PartitionScheme::Equal;
  if (name == "random") return PartitionScheme::Random;
  throw Error(ErrorCode::InvalidArgument, "unknown partition scheme '" + name + "'");
}

std::string encoding_name(CategoricalEncoding e) {
  return e == CategoricalEncoding::OneHot ? "onehot" : "ordinal";
}

CategoricalEncoding encoding_from_name(const std::string& name) {
  if (name == "onehot") return CategoricalEncoding::OneHot;
  if (name == "ordinal") return CategoricalEncoding::Ordinal;
  throw Error(ErrorCode::InvalidArgument, "unknown encoding '" + name + "'");
}

std::string direction_name(ScoreDirection d) {
  return d == ScoreDirection::Conventional ? "conventional" : "paper_literal";
}

ScoreDirection direction_from_name(const std::string& name) {
  if (name == "conventional") return ScoreDirection::Conventional;
  if (name == "paper_literal") return ScoreDirection::PaperLiteral;
  throw Error(ErrorCode::InvalidArgument, "unknown score direction '" + name + "'");
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string dataset_display_name(const DatasetSpec& ds) {
  if (!ds.name.empty()) return ds.name;
  return fs::path(ds.path).stem().string();
}

Dataset cap_test_set(const Dataset& test, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || cap >= test.n_rows()) return test;
  std::vector<std::size_t> idx(test.n_rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return test.subset(idx);
}

struct SeedRecord {
  std::string dataset;
  std::string scenario;
  std::size_t repetition = 0;
  std::size_t draw = 0;
  std::size_t source = 0;
};

}  // namespace

std::vector<ScenarioSpec> ExperimentConfig::paper_scenarios() {
  std::vector<ScenarioSpec> scenarios;
  scenarios.push_back({"pooled", PartitionScheme::Pooled, 1, 10, 1});
  for (std::size_t k : {2, 4, 6}) {
    scenarios.push_back(
        {"eqsrc_k" + std::to_string(k), PartitionScheme::Equal, k, 10, 1});
  }
  for (std::size_t k : {2, 4, 6}) {
    scenarios.push_back(
        {"randsrc_k" + std::to_string(k), PartitionScheme::Random, k, 10, 5});
  }
  return scenarios;
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) {
    throw Error(ErrorCode::InvalidArgument, "experiment needs at least one dataset");
  }
  if (scenarios.empty()) {
    throw Error(ErrorCode::InvalidArgument, "experiment needs at least one scenario");
  }
  if (repetitions == 0) {
    throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must be in (0,1)");
  }
  grid.validate();
  std::vector<std::string> labels;
  for (const auto& s : scenarios) {
    if (s.label.empty()) throw Error(ErrorCode::InvalidArgument, "scenario label is empty");
    if (s.draws == 0) throw Error(ErrorCode::InvalidArgument, "scenario draws must be >= 1");
    labels.push_back(s.label);
  }
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw Error(ErrorCode::InvalidArgument, "scenario labels must be unique");
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const toml::Document doc = toml::parse_file(path);
  ExperimentConfig cfg;

  cfg.master_seed = static_cast<std::uint64_t>(doc.root.get_int("master_seed", 0));
  cfg.repetitions = static_cast<std::size_t>(doc.root.get_int("repetitions", 5));
  cfg.test_cap = static_cast<std::size_t>(doc.root.get_int("test_cap", 0));
  cfg.threads = static_cast<std::size_t>(doc.root.get_int("threads", 0));

  cfg.train_fraction = doc.table_or_empty("split").get_double("train_fraction", 0.8);

  const toml::Table& forest = doc.table_or_empty("forest");
  cfg.forest.n_trees = static_cast<std::size_t>(forest.get_int("n_trees", 100));
  cfg.forest.max_depth = static_cast<std::size_t>(forest.get_int("max_depth", 16));
  cfg.forest.min_leaf = static_cast<std::size_t>(forest.get_int("min_leaf", 2));
  if (forest.has("features_per_split")) {
    const toml::Value& v = forest.at("features_per_split");
    if (v.kind == toml::Value::Kind::Integer) {
      cfg.forest.features_per_split =
          FeatureSampling::fixed_count(static_cast<std::size_t>(v.int_value));
    } else if (v.string_value == "sqrt") {
      cfg.forest.features_per_split = FeatureSampling::sqrt();
    } else if (v.string_value == "all") {
      cfg.forest.features_per_split = FeatureSampling::all();
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  "features_per_split must be \"sqrt\", \"all\", or an integer");
    }
  }

  cfg.score_direction = direction_from_name(
      doc.table_or_empty("tcp").get_string("score_direction", "conventional"));

  const toml::Table& grid = doc.table_or_empty("grid");
  cfg.grid = SignificanceGrid::regular(grid.get_double("start", 0.01),
                                       grid.get_double("stop", 0.99),
                                       grid.get_double("step", 0.01));

  const auto ds_it = doc.table_arrays.find("dataset");
  if (ds_it == doc.table_arrays.end() || ds_it->second.empty()) {
    throw Error(ErrorCode::InvalidArgument, "config needs at least one [[dataset]] block");
  }
  for (const toml::Table& t : ds_it->second) {
    DatasetSpec ds;
    ds.path = t.require_string("path");
    ds.label_column = t.require_string("label_column");
    ds.encoding = encoding_from_name(t.get_string("encoding", "onehot"));
    ds.name = t.get_string("name", "");
    if (ds.name.empty()) ds.name = fs::path(ds.path).stem().string();
    cfg.datasets.push_back(std::move(ds));
  }

  const auto sc_it = doc.table_arrays.find("scenario");
  if (sc_it == doc.table_arrays.end() || sc_it->second.empty()) {
    cfg.scenarios = ExperimentConfig::paper_scenarios();
  } else {
    for (const toml::Table& t : sc_it->second) {
      ScenarioSpec s;
      s.scheme = scheme_from_name(t.require_string("scheme"));
      s.k = static_cast<std::size_t>(t.get_int("k", s.scheme == PartitionScheme::Pooled ? 1 : 2));
      s.min_size = static_cast<std::size_t>(t.get_int("min_size", 10));
      s.draws = static_cast<std::size_t>(
          t.get_int("draws", s.scheme == PartitionScheme::Random ? 5 : 1));
      s.label = t.get_string("label", "");
      if (s.label.empty()) {
        s.label = scheme_name(s.scheme);
        if (s.scheme != PartitionScheme::Pooled) s.label += "_k" + std::to_string(s.k);
      }
      cfg.scenarios.push_back(std::move(s));
    }
  }

  cfg.validate();
  return cfg;
}

SourceEnsemble build_ensemble(const Dataset& train, const ExperimentConfig& config,
                              const std::string& dataset_name, const ScenarioSpec& scenario,
                              std::size_t repetition, std::size_t draw) {
  PartitionSpec pspec;
  pspec.scheme = scenario.scheme;
  pspec.k = scenario.k;
  pspec.min_size = scenario.min_size;
  pspec.seed = derive_seed(config.master_seed, "partition", dataset_name, scenario.label,
                           repetition, draw);
  std::vector<Dataset> parts = partition(train, pspec);

  std::vector<Source> sources;
  sources.reserve(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    TcpConfig tcp;
    tcp.forest = config.forest;
    tcp.forest.seed = derive_seed(config.master_seed, "forest", dataset_name, scenario.label,
                                  repetition, draw, k);
    tcp.score_direction = config.score_direction;
    tcp.smoothing_seed = derive_seed(config.master_seed, "tau", dataset_name, scenario.label,
                                     repetition, draw, k);
    sources.push_back({std::move(parts[k]), tcp});
  }
  return SourceEnsemble(std::move(sources));
}

TestSetPredictions predict_test_set(const SourceEnsemble& ensemble, const Dataset& test,
                                    std::size_t threads) {
  TestSetPredictions out;
  out.aggregated.resize(test.n_rows());
  out.per_source.assign(ensemble.size(), std::vector<PValuePair>(test.n_rows()));
  parallel_for(test.n_rows(), threads, [&](std::size_t i) {
    NdcpResult r = ndcp_predict_detail(ensemble, test.row(i), i);
    out.aggregated[i] = r.aggregated;
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
      out.per_source[k][i] = r.per_source[k];
    }
  });
  return out;
}

void run_scenarios_into(const ExperimentConfig& config, std::vector<ScenarioResult>& results) {
  config.validate();
  const bool multi_dataset = config.datasets.size() > 1;

  for (const DatasetSpec& ds : config.datasets) {
    const std::string name = dataset_display_name(ds);
    const Dataset full = load_csv(ds.path, ds.label_column, ds.encoding);

    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      SplitSpec split_spec{config.train_fraction,
                           derive_seed(config.master_seed, "split", name, rep)};
      auto [train, test_full] = train_test_split(full, split_spec);
      const Dataset test = cap_test_set(
          test_full, config.test_cap, derive_seed(config.master_seed, "testcap", name, rep));
      const std::vector<std::uint8_t>& truths = test.labels();

      for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
        const ScenarioSpec& sc = config.scenarios[si];
        for (std::size_t draw = 0; draw < sc.draws; ++draw) {
          try {
            const SourceEnsemble ensemble =
                build_ensemble(train, config, name, sc, rep, draw);
            const TestSetPredictions preds =
                predict_test_set(ensemble, test, config.threads);

            std::string row_label = sc.label;
            if (multi_dataset) row_label = name + ":" + row_label;
            if (sc.draws > 1) row_label += "_draw" + std::to_string(draw);

            ScenarioResult result;
            result.dataset = name;
            result.scenario = sc.label;
            result.scenario_index = si;
            result.repetition = rep;
            result.draw = draw;
            result.ndcp =
                make_report(row_label, rep, preds.aggregated, truths, config.grid);
            for (std::size_t k = 0; k < ensemble.size(); ++k) {
              result.small_tcp.push_back(
                  make_report("smalltcp_" + row_label + "_src" + std::to_string(k), rep,
                              preds.per_source[k], truths, config.grid));
            }
            results.push_back(std::move(result));
            NDCP_LOG_INFO("done %s rep=%zu scenario=%s draw=%zu", name.c_str(), rep,
                          sc.label.c_str(), draw);
          } catch (const Error& e) {
            throw Error(e.code(), "scenario '" + sc.label + "' repetition " +
                                      std::to_string(rep) + ": " + e.what());
          }
        }
      }
    }
  }
}

std::vector<ScenarioResult> run_scenarios(const ExperimentConfig& config) {
  std::vector<ScenarioResult> results;
  run_scenarios_into(config, results);
  return results;
}

namespace {

void sort_canonical(std::vector<const ScenarioResult*>& ptrs) {
  std::sort(ptrs.begin(), ptrs.end(), [](const ScenarioResult* a, const ScenarioResult* b) {
    return std::tie(a->dataset, a->scenario_index, a->draw, a->repetition) <
           std::tie(b->dataset, b->scenario_index, b->draw, b->repetition);
  });
}

std::string sanitize_filename(std::string s) {
  for (char& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return s;
}

Json config_to_json(const ExperimentConfig& config) {
  Json j;
  j["master_seed"] = config.master_seed;
  j["repetitions"] = config.repetitions;
  j["train_fraction"] = config.train_fraction;
  j["test_cap"] = config.test_cap;
  j["threads"] = config.threads;
  j["score_direction"] = direction_name(config.score_direction);
  Json forest;
  forest["n_trees"] = config.forest.n_trees;
  forest["max_depth"] = config.forest.max_depth;
  forest["min_leaf"] = config.forest.min_leaf;
  switch (config.forest.features_per_split.mode) {
    case FeatureSampling::Mode::Sqrt: forest["features_per_split"] = "sqrt"; break;
    case FeatureSampling::Mode::All: forest["features_per_split"] = "all"; break;
    case FeatureSampling::Mode::Fixed:
      forest["features_per_split"] = config.forest.features_per_split.fixed;
      break;
  }
  j["forest"] = forest;
  j["grid"] = config.grid.levels;
  Json datasets = Json::array();
  for (const auto& ds : config.datasets) {
    Json d;
    d["path"] = ds.path;
    d["label_column"] = ds.label_column;
    d["encoding"] = encoding_name(ds.encoding);
    d["name"] = dataset_display_name(ds);
    datasets.push_back(d);
  }
  j["datasets"] = datasets;
  Json scenarios = Json::array();
  for (const auto& sc : config.scenarios) {
    Json s;
    s["label"] = sc.label;
    s["scheme"] = scheme_name(sc.scheme);
    s["k"] = sc.k;
    s["min_size"] = sc.min_size;
    s["draws"] = sc.draws;
    scenarios.push_back(s);
  }
  j["scenarios"] = scenarios;
  return j;
}

Json derived_seeds_json(const ExperimentConfig& config) {
  Json seeds;
  Json split = Json::array();
  Json partition_seeds = Json::array();
  Json source_seeds = Json::array();
  for (const auto& ds : config.datasets) {
    const std::string name = dataset_display_name(ds);
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      Json s;
      s["dataset"] = name;
      s["repetition"] = rep;
      s["split_seed"] = derive_seed(config.master_seed, "split", name, rep);
      s["testcap_seed"] = derive_seed(config.master_seed, "testcap", name, rep);
      split.push_back(s);
      for (const auto& sc : config.scenarios) {
        for (std::size_t draw = 0; draw < sc.draws; ++draw) {
          Json p;
          p["dataset"] = name;
          p["scenario"] = sc.label;
          p["repetition"] = rep;
          p["draw"] = draw;
          p["seed"] =
              derive_seed(config.master_seed, "partition", name, sc.label, rep, draw);
          partition_seeds.push_back(p);
          for (std::size_t k = 0; k < sc.k; ++k) {
            Json q;
            q["dataset"] = name;
            q["scenario"] = sc.label;
            q["repetition"] = rep;
            q["draw"] = draw;
            q["source"] = k;
            q["forest_seed"] =
                derive_seed(config.master_seed, "forest", name, sc.label, rep, draw, k);
            q["smoothing_seed"] =
                derive_seed(config.master_seed, "tau", name, sc.label, rep, draw, k);
            source_seeds.push_back(q);
          }
        }
      }
    }
  }
  seeds["split"] = split;
  seeds["partition"] = partition_seeds;
  seeds["sources"] = source_seeds;
  return seeds;
}

/// Per-(dataset, repetition) paired value vectors for the Wilcoxon
/// matrices: NDCP groups average over size draws, smallTCP groups average
/// over draws and sources. Raw rows stay available in metrics.csv.
std::vector<std::pair<std::string, std::vector<double>>> paired_groups(
    const ExperimentConfig& config, const std::vector<ScenarioResult>& results,
    bool use_validity) {
  const auto metric = [&](const MetricsReport& r) {
    return use_validity ? r.validity : r.efficiency;
  };
  const std::size_t pairs = config.datasets.size() * config.repetitions;
  const auto pair_index = [&](const ScenarioResult& r) {
    std::size_t ds_idx = 0;
    for (std::size_t d = 0; d < config.datasets.size(); ++d) {
      if (dataset_display_name(config.datasets[d]) == r.dataset) ds_idx = d;
    }
    return ds_idx * config.repetitions + r.repetition;
  };

  std::vector<std::pair<std::string, std::vector<double>>> groups;
  for (const auto& sc : config.scenarios) {
    std::vector<double> sums(pairs, 0.0);
    std::vector<double> counts(pairs, 0.0);
    for (const auto& r : results) {
      if (r.scenario != sc.label) continue;
      const std::size_t i = pair_index(r);
      sums[i] += metric(r.ndcp);
      counts[i] += 1.0;
    }
    std::vector<double> values(pairs, 0.0);
    for (std::size_t i = 0; i < pairs; ++i) {
      if (counts[i] == 0.0) {
        throw Error(ErrorCode::UnpairedResults,
                    "scenario '" + sc.label + "' is missing repetition results");
      }
      values[i] = sums[i] / counts[i];
    }
    groups.emplace_back(sc.label, std::move(values));
  }
  for (const auto& sc : config.scenarios) {
    if (sc.scheme == PartitionScheme::Pooled) continue;
    std::vector<double> sums(pairs, 0.0);
    std::vector<double> counts(pairs, 0.0);
    for (const auto& r : results) {
      if (r.scenario != sc.label) continue;
      const std::size_t i = pair_index(r);
      for (const auto& small : r.small_tcp) {
        sums[i] += metric(small);
        counts[i] += 1.0;
      }
    }
    std::vector<double> values(pairs, 0.0);
    for (std::size_t i = 0; i < pairs; ++i) {
      values[i] = counts[i] > 0.0 ? sums[i] / counts[i] : 0.0;
    }
    groups.emplace_back("smalltcp_" + sc.label, std::move(values));
  }
  return groups;
}

}  // namespace

namespace {

std::string emit_metrics_file(const std::vector<const ScenarioResult*>& ordered,
                              const std::string& out_dir) {
  std::vector<MetricsReport> rows;
  for (const ScenarioResult* r : ordered) {
    rows.push_back(r->ndcp);
    for (const auto& small : r->small_tcp) rows.push_back(small);
  }
  const std::string path = (fs::path(out_dir) / "metrics.csv").string();
  std::ofstream out(path, std::ios::binary);
  write_metrics_csv(out, rows);
  return path;
}

}  // namespace

std::vector<std::string> emit_reports(const ExperimentConfig& config,
                                      const std::vector<ScenarioResult>& results,
                                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;

  std::vector<const ScenarioResult*> ordered;
  ordered.reserve(results.size());
  for (const auto& r : results) ordered.push_back(&r);
  sort_canonical(ordered);

  files.push_back(emit_metrics_file(ordered, out_dir));

  // Mean NDCP calibration curve per (dataset, scenario label).
  {
    std::map<std::pair<std::string, std::string>, std::vector<const ScenarioResult*>> by_key;
    for (const ScenarioResult* r : ordered) {
      by_key[{r->dataset, r->scenario}].push_back(r);
    }
    for (const auto& [key, group] : by_key) {
      CalibrationCurve mean_curve = group.front()->ndcp.curve;
      for (auto& pt : mean_curve) pt.error_rate = 0.0;
      for (const ScenarioResult* r : group) {
        for (std::size_t i = 0; i < mean_curve.size(); ++i) {
          mean_curve[i].error_rate += r->ndcp.curve[i].error_rate;
        }
      }
      for (auto& pt : mean_curve) {
        pt.error_rate /= static_cast<double>(group.size());
      }
      std::string stem = "calibration_";
      if (config.datasets.size() > 1) stem += sanitize_filename(key.first) + "_";
      stem += sanitize_filename(key.second);
      const std::string path = (fs::path(out_dir) / (stem + ".csv")).string();
      std::ofstream out(path, std::ios::binary);
      write_calibration_csv(out, mean_curve);
      files.push_back(path);
    }
  }

  for (const bool use_validity : {true, false}) {
    const auto groups = paired_groups(config, results, use_validity);
    const ComparisonMatrix matrix = comparison_matrix(groups, Alternative::Greater);
    const std::string path =
        (fs::path(out_dir) /
         (use_validity ? "wilcoxon_validity.csv" : "wilcoxon_efficiency.csv"))
            .string();
    std::ofstream out(path, std::ios::binary);
    write_wilcoxon_csv(out, matrix);
    files.push_back(path);
  }

  {
    Json manifest;
    manifest["created_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    manifest["config"] = config_to_json(config);
    manifest["derived_seeds"] = derived_seeds_json(config);
    const std::string path = (fs::path(out_dir) / "run_manifest.json").string();
    std::ofstream out(path, std::ios::binary);
    out << manifest.dump(2) << "\n";
    files.push_back(path);
  }

  return files;
}

ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  std::vector<ScenarioResult> results;
  try {
    run_scenarios_into(config, results);
  } catch (const Error& e) {
    // Keep whatever completed. The paired Wilcoxon matrices need full
    // scenario coverage, so the partial path emits only metrics rows.
    NDCP_LOG_ERROR("run failed: %s", e.what());
    fs::create_directories(out_dir);
    if (!results.empty()) {
      std::vector<const ScenarioResult*> ordered;
      for (const auto& r : results) ordered.push_back(&r);
      sort_canonical(ordered);
      emit_metrics_file(ordered, out_dir);
    }
    std::ofstream marker((fs::path(out_dir) / "partial_results.txt").string());
    marker << "run aborted after " << results.size() << " completed cell(s)\n"
           << e.what() << "\n";
    throw;
  }
  auto files = emit_reports(config, results, out_dir);
  return {std::move(results), std::move(files)};
}

ExperimentConfig config_from_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + manifest_path);
  Json manifest = Json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("config")) {
    throw Error(ErrorCode::MalformedJson, manifest_path + " is not a run manifest");
  }
  const Json& j = manifest["config"];

  ExperimentConfig cfg;
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  cfg.repetitions = j.at("repetitions").get<std::size_t>();
  cfg.train_fraction = j.at("train_fraction").get<double>();
  cfg.test_cap = j.at("test_cap").get<std::size_t>();
  cfg.threads = j.at("threads").get<std::size_t>();
  cfg.score_direction = direction_from_name(j.at("score_direction").get<std::string>());
  const Json& forest = j.at("forest");
  cfg.forest.n_trees = forest.at("n_trees").get<std::size_t>();
  cfg.forest.max_depth = forest.at("max_depth").get<std::size_t>();
  cfg.forest.min_leaf = forest.at("min_leaf").get<std::size_t>();
  const Json& fps = forest.at("features_per_split");
  if (fps.is_number_unsigned()) {
    cfg.forest.features_per_split = FeatureSampling::fixed_count(fps.get<std::size_t>());
  } else if (fps.get<std::string>() == "all") {
    cfg.forest.features_per_split = FeatureSampling::all();
  } else {
    cfg.forest.features_per_split = FeatureSampling::sqrt();
  }
  cfg.grid.levels = j.at("grid").get<std::vector<double>>();
  for (const Json& d : j.at("datasets")) {
    DatasetSpec ds;
    ds.path = d.at("path").get<std::string>();
    ds.label_column = d.at("label_column").get<std::string>();
    ds.encoding = encoding_from_name(d.at("encoding").get<std::string>());
    ds.name = d.at("name").get<std::string>();
    cfg.datasets.push_back(std::move(ds));
  }
  for (const Json& s : j.at("scenarios")) {
    ScenarioSpec sc;
    sc.label = s.at("label").get<std::string>();
    sc.scheme = scheme_from_name(s.at("scheme").get<std::string>());
    sc.k = s.at("k").get<std::size_t>();
    sc.min_size = s.at("min_size").get<std::size_t>();
    sc.draws = s.at("draws").get<std::size_t>();
    cfg.scenarios.push_back(std::move(sc));
  }
  cfg.validate();
  return cfg;
}

}  // namespace ndcp
