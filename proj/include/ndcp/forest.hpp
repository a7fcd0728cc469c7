#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ndcp/dataset.hpp"

namespace ndcp {

/// How many candidate features each split draws.
struct FeatureSampling {
  enum class Mode { Sqrt, All, Fixed };
  Mode mode = Mode::Sqrt;
  std::size_t fixed = 0;

  static FeatureSampling sqrt() { return {Mode::Sqrt, 0}; }
  static FeatureSampling all() { return {Mode::All, 0}; }
  static FeatureSampling fixed_count(std::size_t k) { return {Mode::Fixed, k}; }

  std::size_t count(std::size_t n_features) const;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 2;
  FeatureSampling features_per_split = FeatureSampling::sqrt();
  std::uint64_t seed = 0;
};

/// Axis-aligned threshold node. feature < 0 marks a leaf; leaves hold the
/// class-1 fraction of their training rows.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double leaf_value = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
};

class TrainedForest {
 public:
  TrainedForest(std::vector<DecisionTree> trees, ForestConfig config,
                std::size_t n_features);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }
  std::size_t n_features() const { return n_features_; }

 private:
  std::vector<DecisionTree> trees_;
  ForestConfig config_;
  std::size_t n_features_;
};

/// Trains a seeded random forest: each tree fits a bootstrap resample of
/// the data (n draws with replacement), splits minimize Gini impurity over
/// midpoints of sorted distinct values of a random feature subset, and
/// recursion stops at purity, max_depth, or min_leaf. Tree t's randomness
/// derives from (config.seed, t), so the build order cannot change results.
TrainedForest train_forest(const Dataset& data, const ForestConfig& config);

/// Mean over trees of the leaf class-1 fraction reached by x.
double predict_score(const TrainedForest& forest, std::span<const double> x);

/// Test instrumentation: total train_forest calls in this process, plus an
/// optional observer invoked with each training set. Not for production use.
std::uint64_t forest_training_count();
void reset_forest_training_count();
void set_forest_training_observer(std::function<void(const Dataset&)> observer);

}  // namespace ndcp
