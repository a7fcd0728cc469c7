#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ndcp/dataset.hpp"
#include "ndcp/forest.hpp"

namespace ndcp {

/// Maps the forest score to a nonconformity score. `Conventional` treats
/// the score as the probability of the hypothesized label and uses
/// alpha = 1 - P(label); `PaperLiteral` keeps the printed assignment
/// (label 0 -> 1 - score, label 1 -> score).
enum class ScoreDirection { Conventional, PaperLiteral };

struct NonconformityScore {
  double alpha = 0.0;
};

struct PValuePair {
  double p0 = 0.0;
  double p1 = 0.0;
};

/// Gamma^eps: labels whose p-value strictly exceeds the significance level.
struct PredictionRegion {
  bool contains0 = false;
  bool contains1 = false;
  double epsilon = 0.0;

  std::size_t size() const {
    return (contains0 ? 1u : 0u) + (contains1 ? 1u : 0u);
  }
  bool contains(std::uint8_t label) const { return label == 0 ? contains0 : contains1; }
};

struct TcpConfig {
  ForestConfig forest;
  ScoreDirection score_direction = ScoreDirection::Conventional;
  std::uint64_t smoothing_seed = 0;
};

NonconformityScore nonconformity(double score, std::uint8_t label, ScoreDirection direction);

/// Smoothed Mondrian p-value of `test_alpha` within its label category:
/// (#{alpha > test_alpha} + tau * #{alpha == test_alpha}) / |category|.
/// The category must contain the test example's own score, so the tie count
/// is at least one and the result is strictly positive whenever tau > 0.
double smoothed_mondrian_pvalue(std::span<const double> category_scores, double test_alpha,
                                double tau);

/// Transductive Mondrian prediction for one object: for each hypothesized
/// label the training set is augmented with (x_new, y), a forest is
/// retrained, and the label's smoothed p-value is computed over its own
/// category. All randomness is counter-based on (seed, test_index, label),
/// so predictions for distinct objects are independent and reorderable.
PValuePair tcp_predict(const Dataset& train, std::span<const double> x_new,
                       const TcpConfig& config, std::uint64_t test_index = 0);

PredictionRegion prediction_region(const PValuePair& p, double epsilon);

/// The tau drawn for (test_index, label); exposed so wire-level and
/// in-process paths can be checked against each other.
double smoothing_tau(const TcpConfig& config, std::uint64_t test_index, std::uint8_t label);

}  // namespace ndcp
