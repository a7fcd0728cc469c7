#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ndcp/conformal.hpp"

namespace ndcp {

/// Strictly increasing significance levels in (0,1); defaults to
/// 0.01..0.99 in steps of 0.01.
struct SignificanceGrid {
  std::vector<double> levels;

  static SignificanceGrid regular(double start = 0.01, double stop = 0.99,
                                  double step = 0.01);
  void validate() const;
};

struct CalibrationPoint {
  double epsilon = 0.0;
  double error_rate = 0.0;
};

using CalibrationCurve = std::vector<CalibrationPoint>;

struct MetricsReport {
  std::string scenario;
  std::size_t repetition = 0;
  double validity = 0.0;    // Euclidean deviation from the diagonal
  double efficiency = 0.0;  // observed fuzziness; smaller is better
  CalibrationCurve curve;
};

/// Fraction of test cases whose region excludes the true label.
double error_rate(std::span<const PredictionRegion> regions,
                  std::span<const std::uint8_t> truths);

CalibrationCurve calibration_curve(std::span<const PValuePair> pvals,
                                   std::span<const std::uint8_t> truths,
                                   const SignificanceGrid& grid);

/// sqrt(sum (ER^eps - eps)^2) over the curve's grid.
double validity(const CalibrationCurve& curve);

/// Observed fuzziness: mean p-value of the incorrect label.
double observed_fuzziness(std::span<const PValuePair> pvals,
                          std::span<const std::uint8_t> truths);

MetricsReport make_report(std::string scenario, std::size_t repetition,
                          std::span<const PValuePair> pvals,
                          std::span<const std::uint8_t> truths,
                          const SignificanceGrid& grid);

enum class Alternative { Greater, Less, TwoSided };
enum class WilcoxonMethod { Auto, Exact, Normal };

/// Wilcoxon signed-rank p-value for paired samples. Zero differences are
/// dropped (Wilcoxon convention) and tied |differences| get mean ranks.
/// Auto uses the exact null distribution up to n = 20 and the normal
/// approximation with tie and continuity corrections above that.
/// `Greater` tests whether a tends to exceed b.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                            Alternative alternative,
                            WilcoxonMethod method = WilcoxonMethod::Auto);

struct WilcoxonCell {
  std::optional<double> p_value;  // empty on the diagonal
  bool zero_diff_flag = false;    // degenerate pairing, p reported as 1
};

struct ComparisonMatrix {
  std::vector<std::string> labels;           // declaration order
  std::vector<std::vector<WilcoxonCell>> cells;  // [row][col]
};

/// Pairwise one-sided matrix: cell (row, col) is the p-value for the column
/// scenario having greater values than the row scenario (or the chosen
/// alternative). All value vectors must be equally long and index-paired.
ComparisonMatrix comparison_matrix(
    const std::vector<std::pair<std::string, std::vector<double>>>& results,
    Alternative alternative);

/// CSV emission, 6 significant digits, headers included.
void write_metrics_csv(std::ostream& out, std::span<const MetricsReport> reports);
void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve);
void write_wilcoxon_csv(std::ostream& out, const ComparisonMatrix& matrix);

std::string format_sig6(double v);

}  // namespace ndcp
