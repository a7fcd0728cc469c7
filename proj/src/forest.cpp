#include "ndcp/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>

#include "ndcp/error.hpp"
#include "ndcp/seed.hpp"

namespace ndcp {

namespace {

std::atomic<std::uint64_t> g_training_count{0};
std::mutex g_observer_mutex;
std::function<void(const Dataset&)> g_observer;

struct SplitCandidate {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gini = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestConfig& cfg, Rng& rng)
      : data_(data), cfg_(cfg), rng_(rng), feature_pool_(data.n_features()) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> bootstrap_rows) {
    DecisionTree tree;
    grow(tree, std::move(bootstrap_rows), 0);
    return tree;
  }

 private:
  std::int32_t grow(DecisionTree& tree, std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t n = rows.size();
    std::size_t ones = 0;
    for (std::size_t r : rows) ones += data_.label(r);

    const auto node_index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    const bool pure = ones == 0 || ones == n;
    if (pure || depth >= cfg_.max_depth || n < 2 * cfg_.min_leaf) {
      tree.nodes[node_index].leaf_value = static_cast<double>(ones) / static_cast<double>(n);
      return node_index;
    }

    const auto split = best_split(rows);
    if (!split.found) {
      tree.nodes[node_index].leaf_value = static_cast<double>(ones) / static_cast<double>(n);
      return node_index;
    }

    std::vector<std::size_t> left_rows, right_rows;
    left_rows.reserve(n);
    right_rows.reserve(n);
    for (std::size_t r : rows) {
      (data_.row(r)[split.feature] < split.threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[node_index].feature = static_cast<int>(split.feature);
    tree.nodes[node_index].threshold = split.threshold;
    const std::int32_t left = grow(tree, std::move(left_rows), depth + 1);
    const std::int32_t right = grow(tree, std::move(right_rows), depth + 1);
    tree.nodes[node_index].left = left;
    tree.nodes[node_index].right = right;
    return node_index;
  }

  // Ties on Gini resolve to the lowest feature index, then the lowest
  // threshold; features are scanned in ascending index order and thresholds
  // in ascending value order, so "strictly better" enforces that.
  SplitCandidate best_split(const std::vector<std::size_t>& rows) {
    const std::size_t m = cfg_.features_per_split.count(data_.n_features());
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.bounded(feature_pool_.size() - i));
      std::swap(feature_pool_[i], feature_pool_[j]);
    }
    std::vector<std::size_t> candidates(feature_pool_.begin(),
                                        feature_pool_.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(candidates.begin(), candidates.end());

    SplitCandidate best;
    for (std::size_t f : candidates) evaluate_feature(rows, f, best);
    return best;
  }

  void evaluate_feature(const std::vector<std::size_t>& rows, std::size_t feature,
                        SplitCandidate& best) {
    const std::size_t n = rows.size();
    sorted_.assign(rows.begin(), rows.end());
    std::sort(sorted_.begin(), sorted_.end(), [&](std::size_t a, std::size_t b) {
      return data_.row(a)[feature] < data_.row(b)[feature];
    });

    std::size_t total_ones = 0;
    for (std::size_t r : sorted_) total_ones += data_.label(r);

    std::size_t left_n = 0;
    std::size_t left_ones = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_n += 1;
      left_ones += data_.label(sorted_[i]);
      const double v = data_.row(sorted_[i])[feature];
      const double next = data_.row(sorted_[i + 1])[feature];
      if (v == next) continue;
      const std::size_t right_n = n - left_n;
      if (left_n < cfg_.min_leaf || right_n < cfg_.min_leaf) continue;

      const double threshold = v + (next - v) / 2.0;
      if (!(threshold > v)) continue;  // adjacent representable values

      const std::size_t right_ones = total_ones - left_ones;
      const double score = (static_cast<double>(left_n) * gini(left_n, left_ones) +
                            static_cast<double>(right_n) * gini(right_n, right_ones)) /
                           static_cast<double>(n);
      if (!best.found || score < best.gini) {
        best = {true, feature, threshold, score};
      }
    }
  }

  static double gini(std::size_t n, std::size_t ones) {
    const double p1 = static_cast<double>(ones) / static_cast<double>(n);
    const double p0 = 1.0 - p1;
    return 1.0 - p0 * p0 - p1 * p1;
  }

  const Dataset& data_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::size_t> sorted_;
};

}  // namespace

std::size_t FeatureSampling::count(std::size_t n_features) const {
  switch (mode) {
    case Mode::All:
      return n_features;
    case Mode::Fixed:
      return std::clamp<std::size_t>(fixed, 1, n_features);
    case Mode::Sqrt:
    default:
      return std::clamp<std::size_t>(
          static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))), 1,
          n_features);
  }
}

double DecisionTree::predict(std::span<const double> x) const {
  std::int32_t i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(i)].leaf_value;
}

TrainedForest::TrainedForest(std::vector<DecisionTree> trees, ForestConfig config,
                             std::size_t n_features)
    : trees_(std::move(trees)), config_(config), n_features_(n_features) {
  if (trees_.size() != config_.n_trees) {
    throw Error(ErrorCode::InvalidArgument, "tree count does not match config");
  }
}

TrainedForest train_forest(const Dataset& data, const ForestConfig& config) {
  if (config.n_trees == 0 || config.min_leaf == 0 || config.max_depth == 0) {
    throw Error(ErrorCode::InvalidArgument, "forest config fields must be positive");
  }
  if (data.n_rows() == 0) {
    throw Error(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
  }

  g_training_count.fetch_add(1, std::memory_order_relaxed);
  {
    std::lock_guard<std::mutex> lock(g_observer_mutex);
    if (g_observer) g_observer(data);
  }

  const std::size_t n = data.n_rows();
  std::vector<DecisionTree> trees;
  trees.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, "tree", static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> bootstrap(n);
    for (auto& r : bootstrap) r = static_cast<std::size_t>(rng.bounded(n));
    TreeBuilder builder(data, config, rng);
    trees.push_back(builder.build(std::move(bootstrap)));
  }
  return TrainedForest(std::move(trees), config, data.n_features());
}

double predict_score(const TrainedForest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query has " + std::to_string(x.size()) + " features, forest expects " +
                    std::to_string(forest.n_features()));
  }
  double sum = 0.0;
  for (const auto& tree : forest.trees()) sum += tree.predict(x);
  return sum / static_cast<double>(forest.trees().size());
}

std::uint64_t forest_training_count() {
  return g_training_count.load(std::memory_order_relaxed);
}

void reset_forest_training_count() {
  g_training_count.store(0, std::memory_order_relaxed);
}

void set_forest_training_observer(std::function<void(const Dataset&)> observer) {
  std::lock_guard<std::mutex> lock(g_observer_mutex);
  g_observer = std::move(observer);
}

}  // namespace ndcp
