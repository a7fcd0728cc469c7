#include "ndcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "ndcp/error.hpp"

namespace ndcp {

SignificanceGrid SignificanceGrid::regular(double start, double stop, double step) {
  SignificanceGrid grid;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
  grid.levels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid.levels.push_back(start + static_cast<double>(i) * step);
  }
  grid.validate();
  return grid;
}

void SignificanceGrid::validate() const {
  if (levels.empty()) throw Error(ErrorCode::Empty, "significance grid is empty");
  double prev = 0.0;
  for (double e : levels) {
    if (!(e > 0.0 && e < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "grid levels must lie in (0,1)");
    }
    if (e <= prev && prev != 0.0) {
      throw Error(ErrorCode::InvalidArgument, "grid levels must be strictly increasing");
    }
    prev = e;
  }
}

double error_rate(std::span<const PredictionRegion> regions,
                  std::span<const std::uint8_t> truths) {
  if (regions.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, "regions and truths differ in length");
  }
  if (regions.empty()) throw Error(ErrorCode::Empty, "no test cases");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (!regions[i].contains(truths[i])) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(regions.size());
}

CalibrationCurve calibration_curve(std::span<const PValuePair> pvals,
                                   std::span<const std::uint8_t> truths,
                                   const SignificanceGrid& grid) {
  if (pvals.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, "p-values and truths differ in length");
  }
  if (pvals.empty()) throw Error(ErrorCode::Empty, "no test cases");
  grid.validate();

  CalibrationCurve curve;
  curve.reserve(grid.levels.size());
  std::vector<PredictionRegion> regions(pvals.size());
  for (double eps : grid.levels) {
    for (std::size_t i = 0; i < pvals.size(); ++i) {
      regions[i] = prediction_region(pvals[i], eps);
    }
    curve.push_back({eps, error_rate(regions, truths)});
  }
  return curve;
}

double validity(const CalibrationCurve& curve) {
  if (curve.empty()) throw Error(ErrorCode::Empty, "empty calibration curve");
  double sum_sq = 0.0;
  for (const auto& pt : curve) {
    const double d = pt.error_rate - pt.epsilon;
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq);
}

double observed_fuzziness(std::span<const PValuePair> pvals,
                          std::span<const std::uint8_t> truths) {
  if (pvals.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, "p-values and truths differ in length");
  }
  if (pvals.empty()) throw Error(ErrorCode::Empty, "no test cases");
  double sum = 0.0;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    sum += truths[i] == 1 ? pvals[i].p0 : pvals[i].p1;
  }
  return sum / static_cast<double>(pvals.size());
}

MetricsReport make_report(std::string scenario, std::size_t repetition,
                          std::span<const PValuePair> pvals,
                          std::span<const std::uint8_t> truths,
                          const SignificanceGrid& grid) {
  MetricsReport report;
  report.scenario = std::move(scenario);
  report.repetition = repetition;
  report.curve = calibration_curve(pvals, truths, grid);
  report.validity = validity(report.curve);
  report.efficiency = observed_fuzziness(pvals, truths);
  return report;
}

namespace {

struct RankedDiffs {
  std::vector<double> ranks;     // rank of |d_i|, mean ranks on ties
  std::vector<bool> positive;    // sign of d_i
  double w_plus = 0.0;           // sum of ranks of positive differences
  double tie_correction = 0.0;   // sum over tie groups of (t^3 - t)
};

RankedDiffs rank_differences(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
  }
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.size() < 5) {
    throw Error(ErrorCode::TooFewPairs,
                "need at least 5 nonzero differences, have " + std::to_string(diffs.size()));
  }

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::fabs(diffs[i]) < std::fabs(diffs[j]);
  });

  RankedDiffs out;
  out.ranks.resize(n);
  out.positive.resize(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) {
      ++j;
    }
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    const auto t = static_cast<double>(j - i + 1);
    out.tie_correction += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    out.positive[k] = diffs[k] > 0.0;
    if (out.positive[k]) out.w_plus += out.ranks[k];
  }
  return out;
}

// Exact null distribution of W+ by convolution over the 2^n equiprobable
// sign assignments. Ranks are doubled so mean ranks stay integral; the
// counts are integers below 2^n and stay exact in doubles for n <= 53.
double exact_pvalue(const RankedDiffs& rd, Alternative alternative) {
  const std::size_t n = rd.ranks.size();
  std::vector<std::uint64_t> doubled(n);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = static_cast<std::uint64_t>(std::llround(2.0 * rd.ranks[i]));
    total += doubled[i];
  }
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  std::uint64_t reach = 0;
  for (std::size_t i = 0; i < n; ++i) {
    reach += doubled[i];
    for (std::uint64_t s = reach + 1; s-- > doubled[i];) {
      counts[s] += counts[s - doubled[i]];
    }
  }
  const double denom = std::pow(2.0, static_cast<double>(n));
  const auto w2 = static_cast<std::uint64_t>(std::llround(2.0 * rd.w_plus));

  double ge = 0.0;
  double le = 0.0;
  for (std::uint64_t s = 0; s <= total; ++s) {
    if (s >= w2) ge += counts[s];
    if (s <= w2) le += counts[s];
  }
  switch (alternative) {
    case Alternative::Greater:
      return ge / denom;
    case Alternative::Less:
      return le / denom;
    case Alternative::TwoSided:
    default:
      return std::min(1.0, 2.0 * std::min(ge, le) / denom);
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pvalue(const RankedDiffs& rd, Alternative alternative) {
  const auto n = static_cast<double>(rd.ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - rd.tie_correction / 48.0;
  const double sd = std::sqrt(var);
  switch (alternative) {
    case Alternative::Greater:
      return 1.0 - normal_cdf((rd.w_plus - mean - 0.5) / sd);
    case Alternative::Less:
      return normal_cdf((rd.w_plus - mean + 0.5) / sd);
    case Alternative::TwoSided:
    default:
      return std::min(1.0, 2.0 * (1.0 - normal_cdf((std::fabs(rd.w_plus - mean) - 0.5) / sd)));
  }
}

}  // namespace

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                            Alternative alternative, WilcoxonMethod method) {
  const RankedDiffs rd = rank_differences(a, b);
  const bool exact = method == WilcoxonMethod::Exact ||
                     (method == WilcoxonMethod::Auto && rd.ranks.size() <= 20);
  return exact ? exact_pvalue(rd, alternative) : normal_pvalue(rd, alternative);
}

ComparisonMatrix comparison_matrix(
    const std::vector<std::pair<std::string, std::vector<double>>>& results,
    Alternative alternative) {
  if (results.empty()) throw Error(ErrorCode::Empty, "no scenarios to compare");
  const std::size_t len = results.front().second.size();
  for (const auto& [label, values] : results) {
    if (values.size() != len) {
      throw Error(ErrorCode::UnpairedResults,
                  "scenario '" + label + "' has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(len));
    }
  }

  ComparisonMatrix matrix;
  matrix.labels.reserve(results.size());
  for (const auto& [label, values] : results) matrix.labels.push_back(label);
  matrix.cells.assign(results.size(), std::vector<WilcoxonCell>(results.size()));

  for (std::size_t r = 0; r < results.size(); ++r) {
    for (std::size_t c = 0; c < results.size(); ++c) {
      if (r == c) continue;  // diagonal stays empty
      WilcoxonCell& cell = matrix.cells[r][c];
      try {
        cell.p_value =
            wilcoxon_signed_rank(results[c].second, results[r].second, alternative);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TooFewPairs) throw;
        cell.p_value = 1.0;
        cell.zero_diff_flag = true;
      }
    }
  }
  return matrix;
}

std::string format_sig6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsReport> reports) {
  out << "scenario,repetition,validity,efficiency\n";
  for (const auto& r : reports) {
    out << r.scenario << ',' << r.repetition << ',' << format_sig6(r.validity) << ','
        << format_sig6(r.efficiency) << '\n';
  }
}

void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve) {
  out << "epsilon,error_rate\n";
  for (const auto& pt : curve) {
    out << format_sig6(pt.epsilon) << ',' << format_sig6(pt.error_rate) << '\n';
  }
}

void write_wilcoxon_csv(std::ostream& out, const ComparisonMatrix& matrix) {
  out << "row_scenario,col_scenario,p_value,zero_diff_flag\n";
  for (std::size_t r = 0; r < matrix.labels.size(); ++r) {
    for (std::size_t c = 0; c < matrix.labels.size(); ++c) {
      const WilcoxonCell& cell = matrix.cells[r][c];
      out << matrix.labels[r] << ',' << matrix.labels[c] << ',';
      out << (cell.p_value ? format_sig6(*cell.p_value) : std::string("NA"));
      out << ',' << (cell.zero_diff_flag ? 1 : 0) << '\n';
    }
  }
}

}  // namespace ndcp
