// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Heavy runs are shared: the efficiency-ordering harness
// run also feeds the variance and determinism checks, and the loopback
// federation run feeds the non-disclosure audit.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ndcp/aggregate.hpp"
#include "ndcp/conformal.hpp"
#include "ndcp/dataset.hpp"
#include "ndcp/error.hpp"
#include "ndcp/federation.hpp"
#include "ndcp/harness.hpp"
#include "ndcp/metrics.hpp"
#include "ndcp/seed.hpp"
#include "ndcp/wire.hpp"
#include "../support/synthetic.hpp"

namespace {

using namespace ndcp;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kMasterSeed = 20240817;
constexpr std::size_t kThreads = 2;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& why) {
    if (!cond && ok) {
      ok = false;
      detail = why;
    }
  }
};

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

TcpConfig make_tcp(std::size_t trees, std::uint64_t seed) {
  TcpConfig cfg;
  cfg.forest.n_trees = trees;
  cfg.forest.seed = derive_seed(seed, "forest");
  cfg.smoothing_seed = derive_seed(seed, "tau");
  return cfg;
}

double sample_variance(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / (n - 1.0);
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// ---------------------------------------------------------------------------
// Criterion 1: aggregate_pvalues equals a naive mean oracle bit-exactly.
Check criterion_aggregation() {
  Check check;
  Rng rng(derive_seed(kMasterSeed, "c1"));
  for (int t = 0; t < 10000 && check.ok; ++t) {
    std::vector<PValuePair> pairs(1 + rng.bounded(10));
    for (auto& p : pairs) {
      p.p0 = rng.uniform();
      p.p1 = rng.uniform();
    }
    double s0 = 0.0;
    double s1 = 0.0;
    for (const auto& p : pairs) {
      s0 += p.p0;
      s1 += p.p1;
    }
    const auto k = static_cast<double>(pairs.size());
    const PValuePair got = aggregate_pvalues(pairs);
    check.require(got.p0 == s0 / k && got.p1 == s1 / k,
                  "mismatch against naive mean at case " + std::to_string(t));
  }
  return check;
}

// ---------------------------------------------------------------------------
// Criterion 2: smoothed p-value equals a count-based brute-force oracle.
Check criterion_pvalue_oracle() {
  Check check;
  Rng rng(derive_seed(kMasterSeed, "c2"));
  for (int t = 0; t < 1000 && check.ok; ++t) {
    const std::size_t c = 1 + rng.bounded(40);
    std::vector<double> scores(c);
    for (auto& s : scores) {
      s = rng.bounded(2) == 0 ? static_cast<double>(rng.bounded(10)) / 10.0 : rng.uniform();
    }
    const double alpha = scores[rng.bounded(c)];
    const double tau = rng.uniform();
    double greater = 0.0;
    double equal = 0.0;
    for (double s : scores) {
      if (s > alpha) greater += 1.0;
      if (s == alpha) equal += 1.0;
    }
    const double want = (greater + tau * equal) / static_cast<double>(c);
    check.require(smoothed_mondrian_pvalue(scores, alpha, tau) == want,
                  "mismatch against count oracle at case " + std::to_string(t));
  }
  return check;
}

// ---------------------------------------------------------------------------
// Shared TCP validity machinery for criteria 3-5: fresh exchangeable
// two-Gaussian data per seed, p-values from the real prediction path.
struct ValidityRun {
  std::vector<PValuePair> pvals;
  std::vector<std::uint8_t> truths;
};

ValidityRun run_split_tcp(std::size_t n_total, double train_fraction, std::size_t n_sources,
                          std::uint64_t seed_index, const char* tag) {
  const Dataset full = ndcp::testing::two_gaussian(
      n_total, 2, 1.0, derive_seed(kMasterSeed, tag, "data", seed_index), false);
  const auto [train, test] = train_test_split(
      full, {train_fraction, derive_seed(kMasterSeed, tag, "split", seed_index)});

  std::vector<Dataset> parts;
  if (n_sources == 1) {
    parts.push_back(train);
  } else {
    parts = partition(train, {PartitionScheme::Equal, n_sources, 10,
                              derive_seed(kMasterSeed, tag, "part", seed_index)});
  }
  std::vector<Source> sources;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    sources.push_back(
        {parts[k], make_tcp(25, derive_seed(kMasterSeed, tag, "cfg", seed_index, k))});
  }
  const TestSetPredictions preds =
      predict_test_set(SourceEnsemble(sources), test, kThreads);
  return {preds.aggregated, test.labels()};
}

std::vector<double> mean_error_curve(const std::vector<ValidityRun>& runs,
                                     const std::vector<double>& levels) {
  std::vector<double> mean(levels.size(), 0.0);
  for (const auto& run : runs) {
    for (std::size_t e = 0; e < levels.size(); ++e) {
      std::vector<PredictionRegion> regions(run.pvals.size());
      for (std::size_t i = 0; i < run.pvals.size(); ++i) {
        regions[i] = prediction_region(run.pvals[i], levels[e]);
      }
      mean[e] += error_rate(regions, run.truths);
    }
  }
  for (double& m : mean) m /= static_cast<double>(runs.size());
  return mean;
}

// Criterion 3: pooled TCP validity at eps in {0.1, 0.2, 0.3} within 0.07.
Check criterion_pooled_validity() {
  Check check;
  std::vector<ValidityRun> runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    runs.push_back(run_split_tcp(210, 150.0 / 210.0, 1, seed, "c3"));
  }
  const std::vector<double> levels{0.1, 0.2, 0.3};
  const auto mean = mean_error_curve(runs, levels);
  for (std::size_t e = 0; e < levels.size(); ++e) {
    check.require(std::fabs(mean[e] - levels[e]) <= 0.07,
                  "mean error " + format_number(mean[e]) + " at eps " +
                      format_number(levels[e]) + " is off by more than 0.07");
  }
  check.detail = "mean errors " + format_number(mean[0]) + "/" + format_number(mean[1]) +
                 "/" + format_number(mean[2]) + " at eps 0.1/0.2/0.3";
  return check;
}

// Criterion 4: a single 40-row source is also valid at the same levels.
Check criterion_smalltcp_validity() {
  Check check;
  std::vector<ValidityRun> runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    runs.push_back(run_split_tcp(100, 0.4, 1, seed, "c4"));
  }
  const std::vector<double> levels{0.1, 0.2, 0.3};
  const auto mean = mean_error_curve(runs, levels);
  for (std::size_t e = 0; e < levels.size(); ++e) {
    check.require(std::fabs(mean[e] - levels[e]) <= 0.07,
                  "mean error " + format_number(mean[e]) + " at eps " +
                      format_number(levels[e]) + " is off by more than 0.07");
  }
  check.detail = "mean errors " + format_number(mean[0]) + "/" + format_number(mean[1]) +
                 "/" + format_number(mean[2]) + " at eps 0.1/0.2/0.3";
  return check;
}

// Criterion 5: NDCP over a K=4 equal partition stays conservative for
// every grid level in (0, 0.5]: mean error <= eps + 0.05.
Check criterion_ndcp_conservative() {
  Check check;
  std::vector<ValidityRun> runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    runs.push_back(run_split_tcp(210, 150.0 / 210.0, 4, seed, "c5"));
  }
  std::vector<double> levels;
  for (double e : SignificanceGrid::regular().levels) {
    if (e <= 0.5) levels.push_back(e);
  }
  const auto mean = mean_error_curve(runs, levels);
  double worst_excess = -1.0;
  double worst_eps = 0.0;
  for (std::size_t e = 0; e < levels.size(); ++e) {
    const double excess = mean[e] - levels[e];
    if (excess > worst_excess) {
      worst_excess = excess;
      worst_eps = levels[e];
    }
    check.require(mean[e] <= levels[e] + 0.05,
                  "mean error " + format_number(mean[e]) + " exceeds eps " +
                      format_number(levels[e]) + " + 0.05");
  }
  check.detail = "worst excess " + format_number(worst_excess) + " at eps " +
                 format_number(worst_eps);
  return check;
}

// ---------------------------------------------------------------------------
// Shared harness run for criteria 6, 7, and 11.
struct HarnessShared {
  ExperimentConfig config;
  std::vector<ScenarioResult> results;
  std::string out_dir;
  std::string data_csv;
};

std::string write_synthetic_csv(const std::string& path, std::size_t n, std::uint64_t seed) {
  const Dataset d = ndcp::testing::two_gaussian(n, 2, 1.0, seed, false);
  std::ofstream out(path, std::ios::binary);
  out << "x0,x1,cls\n";
  char buf[80];
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%s\n", d.row(i)[0], d.row(i)[1],
                  d.label(i) == 1 ? "pos" : "neg");
    out << buf;
  }
  return path;
}

HarnessShared run_shared_harness(const std::string& scratch) {
  HarnessShared shared;
  shared.data_csv =
      write_synthetic_csv(scratch + "/synthetic.csv", 250, derive_seed(kMasterSeed, "c6data"));
  shared.out_dir = scratch + "/run1";

  ExperimentConfig& cfg = shared.config;
  cfg.datasets.push_back({shared.data_csv, "cls", CategoricalEncoding::OneHot, "synthetic"});
  cfg.scenarios = ExperimentConfig::paper_scenarios();
  cfg.repetitions = 5;
  cfg.forest.n_trees = 25;
  cfg.test_cap = 60;
  cfg.master_seed = kMasterSeed;
  cfg.threads = kThreads;

  shared.results = run_experiment(cfg, shared.out_dir).results;
  return shared;
}

// Per-(scenario, repetition) NDCP efficiency, draws averaged.
std::map<std::string, std::vector<double>> ndcp_eff_by_scenario(const HarnessShared& shared) {
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, std::vector<double>> counts;
  for (const auto& sc : shared.config.scenarios) {
    sums[sc.label].assign(shared.config.repetitions, 0.0);
    counts[sc.label].assign(shared.config.repetitions, 0.0);
  }
  for (const auto& r : shared.results) {
    sums[r.scenario][r.repetition] += r.ndcp.efficiency;
    counts[r.scenario][r.repetition] += 1.0;
  }
  for (auto& [label, values] : sums) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] /= counts[label][i];
  }
  return sums;
}

// Criterion 6: pooled is the most efficient scenario, significantly.
Check criterion_efficiency_ordering(const HarnessShared& shared) {
  Check check;
  const auto eff = ndcp_eff_by_scenario(shared);
  const double pooled_median = median(eff.at("pooled"));

  double best_other = 1e9;
  std::string best_label;
  for (const auto& [label, values] : eff) {
    if (label == "pooled") continue;
    const double m = median(values);
    if (m < best_other) {
      best_other = m;
      best_label = label;
    }
    check.require(pooled_median <= m, "pooled median " + format_number(pooled_median) +
                                          " is not minimal: " + label + " has " +
                                          format_number(m));
  }

  // Paired one-sided Wilcoxon over all (scenario, repetition) pairs:
  // alternative = partitioned scenarios have greater observed fuzziness.
  std::vector<double> scenario_values;
  std::vector<double> pooled_values;
  for (const auto& [label, values] : eff) {
    if (label == "pooled") continue;
    for (std::size_t r = 0; r < values.size(); ++r) {
      scenario_values.push_back(values[r]);
      pooled_values.push_back(eff.at("pooled")[r]);
    }
  }
  const double p =
      wilcoxon_signed_rank(scenario_values, pooled_values, Alternative::Greater);
  check.require(p < 0.05, "one-sided Wilcoxon p = " + format_number(p) + " >= 0.05");
  check.detail = "pooled median " + format_number(pooled_median) + ", closest scenario " +
                 best_label + " at " + format_number(best_other) +
                 ", Wilcoxon p = " + format_number(p);
  return check;
}

// Criterion 7: for K in {4,6}, the NDCP fuzziness variance across the five
// RandSrc size draws is below the pooled-across-sources smallTCP variance
// in at least 4 of the 5 repetitions.
Check criterion_variance_reduction(const HarnessShared& shared) {
  Check check;
  std::ostringstream detail;
  for (const std::size_t k : {std::size_t{4}, std::size_t{6}}) {
    const std::string label = "randsrc_k" + std::to_string(k);
    std::size_t wins = 0;
    for (std::size_t rep = 0; rep < shared.config.repetitions; ++rep) {
      std::vector<double> ndcp_eff;
      std::vector<double> small_eff;
      for (const auto& r : shared.results) {
        if (r.scenario != label || r.repetition != rep) continue;
        ndcp_eff.push_back(r.ndcp.efficiency);
        for (const auto& small : r.small_tcp) small_eff.push_back(small.efficiency);
      }
      if (sample_variance(ndcp_eff) < sample_variance(small_eff)) ++wins;
    }
    detail << label << ": " << wins << "/5 ";
    check.require(wins >= 4, label + " shows reduced variance in only " +
                                 std::to_string(wins) + " of 5 repetitions");
  }
  check.detail = detail.str();
  return check;
}

// Criterion 8: Wilcoxon exactness and approximation agreement.
Check criterion_wilcoxon() {
  Check check;
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{0, 0, 0, 0, 0};
  check.require(wilcoxon_signed_rank(a, b, Alternative::Greater) == 0.03125,
                "all-positive n=5 one-sided case is not exactly 1/32");

  Rng rng(derive_seed(kMasterSeed, "c8"));
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(25);
    std::vector<double> y(25, 0.0);
    for (auto& v : x) v = 0.25 + rng.normal();
    for (const auto alt : {Alternative::Greater, Alternative::Less, Alternative::TwoSided}) {
      const double exact = wilcoxon_signed_rank(x, y, alt, WilcoxonMethod::Exact);
      const double normal = wilcoxon_signed_rank(x, y, alt, WilcoxonMethod::Normal);
      worst = std::max(worst, std::fabs(exact - normal));
    }
  }
  check.require(worst <= 0.02, "exact vs normal diverge by " + format_number(worst));
  check.detail = "worst exact-vs-normal gap " + format_number(worst) + " at n=25";
  return check;
}

// ---------------------------------------------------------------------------
// Shared loopback federation run for criteria 9 and 10.
struct FederationShared {
  bool equal = true;
  std::string mismatch;
  std::string transcript;  // every line that crossed the wire, both ways
};

FederationShared run_loopback() {
  FederationShared shared;

  // Three features: two informative plus a constant sentinel column whose
  // value must never appear in any transcript.
  const double sentinel = 87654.321;
  const Dataset base =
      ndcp::testing::two_gaussian(120, 2, 1.0, derive_seed(kMasterSeed, "c9data"));
  std::vector<double> feats;
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < base.n_rows(); ++i) {
    feats.push_back(base.row(i)[0]);
    feats.push_back(base.row(i)[1]);
    feats.push_back(sentinel);
    labels.push_back(base.label(i));
  }
  const Dataset full(std::move(feats), std::move(labels), 3);
  const auto parts =
      partition(full, {PartitionScheme::Equal, 4, 10, derive_seed(kMasterSeed, "c9part")});

  std::mutex transcript_mutex;
  auto sink = [&](TranscriptDirection, std::string_view line) {
    std::lock_guard<std::mutex> lock(transcript_mutex);
    shared.transcript.append(line);
  };

  std::vector<Source> sources;
  std::vector<std::unique_ptr<SourceNode>> nodes;
  std::vector<std::thread> threads;
  std::vector<std::string> addresses;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const TcpConfig cfg = make_tcp(10, derive_seed(kMasterSeed, "c9cfg", k));
    sources.push_back({parts[k], cfg});
    SourceNodeOptions options;
    options.transcript = sink;
    nodes.push_back(std::make_unique<SourceNode>(parts[k], cfg, options));
    addresses.push_back("127.0.0.1:" + std::to_string(nodes.back()->start()));
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    threads.emplace_back([&nodes, k] { nodes[k]->run(); });
  }
  const SourceEnsemble ensemble(sources);

  CoordinatorOptions coptions;
  coptions.transcript = sink;
  Coordinator coordinator(addresses, coptions);
  coordinator.connect();

  Rng rng(derive_seed(kMasterSeed, "c9query"));
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal(), 0.25};
    const PValuePair wire = coordinator.coordinate_predict(x);
    const PValuePair local = ndcp_predict(ensemble, x, i);
    if (wire.p0 != local.p0 || wire.p1 != local.p1) {
      shared.equal = false;
      shared.mismatch = "query " + std::to_string(i) + ": wire (" + format_number(wire.p0) +
                        "," + format_number(wire.p1) + ") vs local (" +
                        format_number(local.p0) + "," + format_number(local.p1) + ")";
      break;
    }
  }
  coordinator.shutdown_sources();
  for (auto& node : nodes) node->request_stop();
  for (auto& t : threads) t.join();
  return shared;
}

// Criterion 9: federation equals in-process aggregation bit-exactly.
Check criterion_federation_equivalence(const FederationShared& shared) {
  Check check;
  check.require(shared.equal, shared.mismatch);
  check.detail = "20 queries, K=4, bit-exact";
  return check;
}

// Criterion 10: transcripts are schema-only and leak no training bytes.
Check criterion_non_disclosure(const FederationShared& shared) {
  Check check;
  check.require(!shared.transcript.empty(), "no transcript captured");
  check.require(shared.transcript.find("87654") == std::string::npos,
                "sentinel training value found in a transcript");

  std::size_t lines = 0;
  std::size_t pos = 0;
  while (pos < shared.transcript.size() && check.ok) {
    const auto eol = shared.transcript.find('\n', pos);
    if (eol == std::string::npos) {
      check.require(false, "transcript ends with an unterminated line");
      break;
    }
    try {
      decode_message(shared.transcript.substr(pos, eol - pos));
    } catch (const Error& e) {
      check.require(false, std::string("non-schema line on the wire: ") + e.what());
    }
    pos = eol + 1;
    ++lines;
  }

  try {
    decode_message(
        R"({"type":"predict_request","request_id":0,"features":[1.0],"rows":[[0.1,0.2]]})");
    check.require(false, "decode_message accepted an injected extra field");
  } catch (const Error& e) {
    check.require(e.code() == ErrorCode::ProtocolError, "wrong rejection category");
  }
  check.detail = std::to_string(lines) + " wire lines audited";
  return check;
}

// Criterion 11: repeating the harness run reproduces metrics.csv bytes.
Check criterion_determinism(const HarnessShared& shared, const std::string& scratch) {
  Check check;
  const std::string out2 = scratch + "/run2";
  run_experiment(shared.config, out2);
  std::ifstream a(shared.out_dir + "/metrics.csv", std::ios::binary);
  std::ifstream b(out2 + "/metrics.csv", std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                            std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                            std::istreambuf_iterator<char>());
  check.require(!bytes_a.empty(), "first run produced no metrics.csv");
  check.require(bytes_a == bytes_b, "metrics.csv differs between repeat runs");
  check.detail = std::to_string(bytes_a.size()) + " bytes compared";
  return check;
}

struct Outcome {
  int id;
  std::string name;
  bool ok;
  double seconds;
  std::string detail;
};

}  // namespace

int main() {
  const std::string scratch =
      (std::filesystem::temp_directory_path() /
       ("ndcp_acceptance_" + std::to_string(::getpid())))
          .string();
  std::filesystem::create_directories(scratch);

  std::vector<Outcome> outcomes;
  const auto run = [&](int id, const std::string& name, double budget_s,
                       const std::function<Check()>& fn) {
    const auto start = Clock::now();
    Check check;
    try {
      check = fn();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (budget_s > 0 && seconds > budget_s && check.ok) {
      check.ok = false;
      check.detail = "runtime " + format_number(seconds) + " s exceeds " +
                     format_number(budget_s) + " s budget";
    }
    outcomes.push_back({id, name, check.ok, seconds, check.detail});
    std::printf("%s  %2d  %-28s (%.1f s)%s%s\n", check.ok ? "PASS" : "FAIL", id,
                name.c_str(), seconds, check.detail.empty() ? "" : "  -- ",
                check.detail.c_str());
    std::fflush(stdout);
  };

  run(1, "aggregation exactness", 1.0, criterion_aggregation);
  run(2, "smoothed p-value oracle", 1.0, criterion_pvalue_oracle);

  const auto shared_start = Clock::now();
  run(3, "pooled TCP validity", 120.0, criterion_pooled_validity);
  run(4, "smallTCP validity", 60.0, criterion_smalltcp_validity);
  run(5, "NDCP conservative validity", 300.0, criterion_ndcp_conservative);

  HarnessShared harness_shared;
  run(6, "efficiency ordering", 0.0, [&] {
    harness_shared = run_shared_harness(scratch);
    Check check = criterion_efficiency_ordering(harness_shared);
    // The <10 min budget covers the runs shared with criteria 3-5.
    const double total = std::chrono::duration<double>(Clock::now() - shared_start).count();
    if (total > 600.0 && check.ok) {
      check.ok = false;
      check.detail = "criteria 3-6 took " + format_number(total) + " s > 600 s";
    }
    return check;
  });
  run(7, "variance reduction", 0.0,
      [&] { return criterion_variance_reduction(harness_shared); });

  run(8, "wilcoxon correctness", 5.0, criterion_wilcoxon);

  FederationShared federation_shared;
  run(9, "federation equivalence", 60.0, [&] {
    federation_shared = run_loopback();
    return criterion_federation_equivalence(federation_shared);
  });
  run(10, "non-disclosure audit", 0.0,
      [&] { return criterion_non_disclosure(federation_shared); });

  run(11, "determinism", 0.0,
      [&] { return criterion_determinism(harness_shared, scratch); });

  int failures = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(outcomes.size()) - failures,
              outcomes.size());

  std::error_code ec;
  std::filesystem::remove_all(scratch, ec);
  return failures == 0 ? 0 : 1;
}
