// ndcp: dataset inspection, single predictions, source serving,
// coordination, and full experiment runs behind one binary.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ndcp/dataset.hpp"
#include "ndcp/error.hpp"
#include "ndcp/federation.hpp"
#include "ndcp/harness.hpp"
#include "ndcp/log.hpp"
#include "ndcp/seed.hpp"

namespace {

using ndcp::CategoricalEncoding;
using ndcp::ScoreDirection;

struct ModelFlags {
  std::uint64_t seed = 0;
  std::size_t trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 2;
  std::string direction = "conventional";
  std::string encoding = "onehot";
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
  cmd->add_option("--seed", flags.seed, "Master seed for all randomness");
  cmd->add_option("--trees", flags.trees, "Trees per forest")->check(CLI::PositiveNumber);
  cmd->add_option("--max-depth", flags.max_depth, "Maximum tree depth")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--min-leaf", flags.min_leaf, "Minimum rows per leaf")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--direction", flags.direction, "Nonconformity direction")
      ->check(CLI::IsMember({"conventional", "paper_literal"}));
  cmd->add_option("--encoding", flags.encoding, "Categorical encoding")
      ->check(CLI::IsMember({"onehot", "ordinal"}));
}

CategoricalEncoding parse_encoding(const std::string& s) {
  return s == "ordinal" ? CategoricalEncoding::Ordinal : CategoricalEncoding::OneHot;
}

ndcp::TcpConfig tcp_config_from(const ModelFlags& flags) {
  ndcp::TcpConfig cfg;
  cfg.forest.n_trees = flags.trees;
  cfg.forest.max_depth = flags.max_depth;
  cfg.forest.min_leaf = flags.min_leaf;
  cfg.forest.seed = ndcp::derive_seed(flags.seed, "forest");
  cfg.smoothing_seed = ndcp::derive_seed(flags.seed, "tau");
  cfg.score_direction = flags.direction == "paper_literal" ? ScoreDirection::PaperLiteral
                                                           : ScoreDirection::Conventional;
  return cfg;
}

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_inspect(const std::string& path, const std::string& label_column,
                const std::string& encoding, bool porcelain) {
  const ndcp::LoadResult loaded =
      ndcp::load_csv_with_schema(path, label_column, parse_encoding(encoding));
  const ndcp::Dataset& data = loaded.data;
  const std::size_t n0 = data.class_count(0);
  const std::size_t n1 = data.class_count(1);
  if (porcelain) {
    nlohmann::ordered_json j;
    j["n"] = data.n_rows();
    j["p"] = data.n_features();
    j["label0"] = loaded.schema.label_levels[0];
    j["label1"] = loaded.schema.label_levels[1];
    j["count0"] = n0;
    j["count1"] = n1;
    j["rows_dropped"] = loaded.rows_dropped;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "rows (n):       " << data.n_rows() << "\n"
              << "features (p):   " << data.n_features() << "\n"
              << "class balance:  " << loaded.schema.label_levels[0] << "=0: " << n0 << ", "
              << loaded.schema.label_levels[1] << "=1: " << n1 << "\n"
              << "rows dropped:   " << loaded.rows_dropped << " (missing cells)\n";
  }
  return 0;
}

int cmd_predict(const std::string& train_path, const std::string& label_column,
                const std::string& query_path, const ModelFlags& flags,
                const std::string& out_path) {
  const ndcp::LoadResult loaded =
      ndcp::load_csv_with_schema(train_path, label_column, parse_encoding(flags.encoding));
  const auto queries = ndcp::load_query_csv(query_path, loaded.schema);
  const ndcp::TcpConfig cfg = tcp_config_from(flags);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw ndcp::Error(ndcp::ErrorCode::IoError, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "index,p0,p1\n";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const ndcp::PValuePair p = ndcp::tcp_predict(loaded.data, queries[i], cfg, i);
    out << i << ',' << full_precision(p.p0) << ',' << full_precision(p.p1) << "\n";
  }
  return 0;
}

int cmd_serve_source(const std::string& data_path, const std::string& label_column,
                     std::uint16_t port, const ModelFlags& flags,
                     const std::string& transcript_path) {
  const ndcp::Dataset data =
      ndcp::load_csv(data_path, label_column, parse_encoding(flags.encoding));

  ndcp::SourceNodeOptions options;
  options.port = port;
  std::ofstream transcript;
  if (!transcript_path.empty()) {
    transcript.open(transcript_path, std::ios::binary);
    options.transcript = [&transcript](ndcp::TranscriptDirection, std::string_view line) {
      transcript << line;
      transcript.flush();
    };
  }

  ndcp::SourceNode node(data, tcp_config_from(flags), options);
  const std::uint16_t bound = node.start();
  std::cout << "listening on " << bound << std::endl;
  ndcp::serve_source(node);
  NDCP_LOG_INFO("source node stopped");
  return 0;
}

int cmd_coordinate(const std::string& sources_arg, const std::string& query_path,
                   const std::string& out_path, long timeout_ms) {
  std::vector<std::string> addresses;
  std::string cur;
  for (char c : sources_arg + ",") {
    if (c == ',') {
      if (!cur.empty()) addresses.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }

  ndcp::CoordinatorOptions options;
  options.timeout = std::chrono::milliseconds(timeout_ms);
  ndcp::Coordinator coordinator(addresses, options);
  coordinator.connect();

  // Query objects arrive pre-encoded: all-numeric columns whose count must
  // match the sources' feature dimension. Header names are free-form here,
  // so build a numeric schema from the observed header.
  ndcp::CsvSchema schema;
  {
    std::ifstream probe(query_path);
    std::string first_line;
    std::getline(probe, first_line);
    std::string col;
    for (char c : first_line + ",") {
      if (c == ',') {
        schema.columns.push_back({col, true, {}});
        col.clear();
      } else if (c != '\r') {
        col.push_back(c);
      }
    }
  }
  if (schema.columns.size() != coordinator.feature_dim()) {
    throw ndcp::Error(ndcp::ErrorCode::DimensionMismatch,
                      "query file has " + std::to_string(schema.columns.size()) +
                          " columns, sources serve " +
                          std::to_string(coordinator.feature_dim()));
  }
  const auto queries = ndcp::load_query_csv(query_path, schema);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw ndcp::Error(ndcp::ErrorCode::IoError, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "index,p0,p1\n";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const ndcp::PValuePair p = coordinator.coordinate_predict(queries[i]);
    out << i << ',' << full_precision(p.p0) << ',' << full_precision(p.p1) << "\n";
  }
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::size_t threads,
            bool porcelain) {
  ndcp::ExperimentConfig config = ndcp::load_experiment_config(config_path);
  if (threads > 0) config.threads = threads;
  const ndcp::ExperimentOutput output = ndcp::run_experiment(config, out_dir);
  if (porcelain) {
    nlohmann::ordered_json j;
    j["results"] = output.results.size();
    j["files"] = output.files;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "completed " << output.results.size() << " scenario cells\n";
    for (const auto& f : output.files) std::cout << "wrote " << f << "\n";
  }
  return 0;
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir,
               std::size_t threads, bool porcelain) {
  ndcp::ExperimentConfig config = ndcp::config_from_manifest(manifest_path);
  if (threads > 0) config.threads = threads;
  const ndcp::ExperimentOutput output = ndcp::run_experiment(config, out_dir);
  if (porcelain) {
    nlohmann::ordered_json j;
    j["results"] = output.results.size();
    j["files"] = output.files;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "replayed " << output.results.size() << " scenario cells into " << out_dir
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Disclosed Conformal Prediction toolkit"};
  app.require_subcommand(1);

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Load a CSV and report shape and class balance");
  std::string in_path, in_label, in_encoding = "onehot";
  bool in_porcelain = false;
  inspect->add_option("data", in_path, "CSV file")->required();
  inspect->add_option("--label-column", in_label, "Label column name")->required();
  inspect->add_option("--encoding", in_encoding, "Categorical encoding")
      ->check(CLI::IsMember({"onehot", "ordinal"}));
  inspect->add_flag("--porcelain", in_porcelain, "Machine-readable single JSON line");

  // predict
  auto* predict = app.add_subcommand("predict", "Transductive p-values for query objects");
  std::string pr_train, pr_label, pr_query, pr_out;
  bool pr_porcelain = false;  // output is CSV either way
  ModelFlags pr_flags;
  predict->add_option("--train", pr_train, "Training CSV")->required();
  predict->add_option("--label-column", pr_label, "Label column name")->required();
  predict->add_option("--query", pr_query, "Query CSV (feature columns only)")->required();
  predict->add_option("--out", pr_out, "Output CSV (default stdout)");
  predict->add_flag("--porcelain", pr_porcelain, "Accepted for symmetry; output is already CSV");
  add_model_flags(predict, pr_flags);

  // serve-source
  auto* serve = app.add_subcommand("serve-source", "Answer p-value queries over the wire");
  std::string sv_data, sv_label, sv_transcript;
  std::uint16_t sv_port = 0;
  ModelFlags sv_flags;
  serve->add_option("--data", sv_data, "Private training CSV")->required();
  serve->add_option("--label-column", sv_label, "Label column name")->required();
  serve->add_option("--port", sv_port, "Listen port (0 = ephemeral)");
  serve->add_option("--transcript", sv_transcript, "Append raw wire lines to this file");
  add_model_flags(serve, sv_flags);

  // coordinate
  auto* coordinate = app.add_subcommand("coordinate", "Aggregate p-values from source nodes");
  std::string co_sources, co_query, co_out;
  bool co_porcelain = false;
  long co_timeout = 60000;
  coordinate->add_option("--sources", co_sources, "Comma-separated host:port list")->required();
  coordinate->add_option("--query", co_query, "Query CSV (numeric features)")->required();
  coordinate->add_option("--out", co_out, "Output CSV (default stdout)");
  coordinate->add_flag("--porcelain", co_porcelain, "Accepted for symmetry; output is already CSV");
  coordinate->add_option("--timeout-ms", co_timeout, "Per-prediction timeout");

  // run
  auto* run = app.add_subcommand("run", "Run the full evaluation protocol");
  std::string rn_config, rn_out = "out";
  std::size_t rn_threads = 0;
  bool rn_porcelain = false;
  run->add_option("--config", rn_config, "Experiment TOML")->required();
  run->add_option("--out", rn_out, "Output directory");
  run->add_option("--threads", rn_threads, "Worker threads (0 = auto)");
  run->add_flag("--porcelain", rn_porcelain, "Machine-readable single JSON line");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-run an experiment from its manifest");
  std::string rp_manifest, rp_out = "replay_out";
  std::size_t rp_threads = 0;
  bool rp_porcelain = false;
  replay->add_option("--manifest", rp_manifest, "run_manifest.json from a previous run")
      ->required();
  replay->add_option("--out", rp_out, "Output directory");
  replay->add_option("--threads", rp_threads, "Worker threads (0 = auto)");
  replay->add_flag("--porcelain", rp_porcelain, "Machine-readable single JSON line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (inspect->parsed()) return cmd_inspect(in_path, in_label, in_encoding, in_porcelain);
    if (predict->parsed()) return cmd_predict(pr_train, pr_label, pr_query, pr_flags, pr_out);
    if (serve->parsed()) {
      return cmd_serve_source(sv_data, sv_label, sv_port, sv_flags, sv_transcript);
    }
    if (coordinate->parsed()) return cmd_coordinate(co_sources, co_query, co_out, co_timeout);
    if (run->parsed()) return cmd_run(rn_config, rn_out, rn_threads, rn_porcelain);
    if (replay->parsed()) return cmd_replay(rp_manifest, rp_out, rp_threads, rp_porcelain);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
