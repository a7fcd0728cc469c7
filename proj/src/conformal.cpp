#include "ndcp/conformal.hpp"

#include <cmath>
#include <string>

#include "ndcp/error.hpp"
#include "ndcp/seed.hpp"

namespace ndcp {

NonconformityScore nonconformity(double score, std::uint8_t label, ScoreDirection direction) {
  if (direction == ScoreDirection::PaperLiteral) {
    return {label == 0 ? 1.0 - score : score};
  }
  return {label == 0 ? score : 1.0 - score};
}

double smoothed_mondrian_pvalue(std::span<const double> category_scores, double test_alpha,
                                double tau) {
  if (category_scores.empty()) {
    throw Error(ErrorCode::EmptyCategory, "p-value category has no scores");
  }
  std::size_t greater = 0;
  std::size_t equal = 0;
  for (double a : category_scores) {
    if (a > test_alpha) {
      ++greater;
    } else if (a == test_alpha) {
      ++equal;
    }
  }
  return (static_cast<double>(greater) + tau * static_cast<double>(equal)) /
         static_cast<double>(category_scores.size());
}

double smoothing_tau(const TcpConfig& config, std::uint64_t test_index, std::uint8_t label) {
  Rng rng(derive_seed(config.smoothing_seed, "tau", test_index,
                      static_cast<std::uint64_t>(label)));
  return rng.uniform();
}

PValuePair tcp_predict(const Dataset& train, std::span<const double> x_new,
                       const TcpConfig& config, std::uint64_t test_index) {
  if (train.n_rows() == 0) {
    throw Error(ErrorCode::EmptyDataset, "tcp_predict needs a non-empty training set");
  }
  if (x_new.size() != train.n_features()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query has " + std::to_string(x_new.size()) + " features, training set has " +
                    std::to_string(train.n_features()));
  }

  double p[2] = {0.0, 0.0};
  for (std::uint8_t y = 0; y <= 1; ++y) {
    const Dataset augmented = train.with_appended(x_new, y);

    ForestConfig fc = config.forest;
    fc.seed = derive_seed(config.forest.seed, "tcp", test_index, static_cast<std::uint64_t>(y));
    const TrainedForest forest = train_forest(augmented, fc);

    // Mondrian taxonomy by label: only examples hypothesized/observed as y
    // enter the category, the augmented test example last.
    std::vector<double> category;
    category.reserve(augmented.n_rows());
    for (std::size_t i = 0; i < augmented.n_rows(); ++i) {
      if (augmented.label(i) != y) continue;
      const double score = predict_score(forest, augmented.row(i));
      category.push_back(nonconformity(score, y, config.score_direction).alpha);
    }
    const double test_alpha = category.back();
    p[y] = smoothed_mondrian_pvalue(category, test_alpha, smoothing_tau(config, test_index, y));
  }
  return {p[0], p[1]};
}

PredictionRegion prediction_region(const PValuePair& p, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must be in (0,1)");
  }
  return {p.p0 > epsilon, p.p1 > epsilon, epsilon};
}

}  // namespace ndcp
