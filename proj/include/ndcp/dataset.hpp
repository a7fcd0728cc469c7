#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ndcp {

/// Immutable labeled examples: an n x p feature matrix (row-major) plus a
/// binary label per row. Construction validates the invariants; after that
/// a Dataset is safe to share across threads.
class Dataset {
 public:
  Dataset(std::vector<double> features, std::vector<std::uint8_t> labels,
          std::size_t n_features, std::vector<std::string> feature_names = {});

  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_features() const { return n_features_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * n_features_, n_features_};
  }
  std::uint8_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  /// New dataset holding the given rows (in the given order).
  Dataset subset(std::span<const std::size_t> indices) const;

  /// New dataset with one extra labeled row appended.
  Dataset with_appended(std::span<const double> x, std::uint8_t label) const;

  std::size_t class_count(std::uint8_t label) const;

 private:
  std::vector<double> features_;
  std::vector<std::uint8_t> labels_;
  std::size_t n_features_ = 0;
  std::vector<std::string> feature_names_;
};

enum class CategoricalEncoding { OneHot, Ordinal };

/// Per-column description established when a training CSV is loaded. Query
/// files are encoded against this schema so indicator columns and level
/// ordering always match the training data.
struct CsvColumn {
  std::string name;
  bool is_numeric = true;
  std::vector<std::string> levels;  // sorted, categorical columns only
};

struct CsvSchema {
  std::vector<CsvColumn> columns;  // feature columns, file order
  std::string label_column;
  std::vector<std::string> label_levels;  // two values, sorted; index = label
  CategoricalEncoding encoding = CategoricalEncoding::OneHot;

  std::size_t encoded_width() const;
};

struct LoadResult {
  Dataset data;
  CsvSchema schema;
  std::size_t rows_dropped = 0;  // rows removed because of missing cells
};

/// Loads an RFC-4180-style CSV (header row, UTF-8). The label column must
/// hold exactly two distinct values; they map to {0,1} in lexicographic
/// order. Columns where every cell parses as a number pass through;
/// anything else is treated as categorical and encoded per `encoding`.
/// Rows with missing cells ("" or "?") are dropped and counted.
LoadResult load_csv_with_schema(const std::string& path,
                                const std::string& label_column,
                                CategoricalEncoding encoding);

Dataset load_csv(const std::string& path, const std::string& label_column,
                 CategoricalEncoding encoding = CategoricalEncoding::OneHot);

/// Loads a label-free query CSV whose header must list exactly the schema's
/// feature columns; values are encoded with the training schema.
std::vector<std::vector<double>> load_query_csv(const std::string& path,
                                                const CsvSchema& schema);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

enum class PartitionScheme { Pooled, Equal, Random };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::Pooled;
  std::size_t k = 1;          // number of sources
  std::size_t min_size = 10;  // floor per part, Random scheme only
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded disjoint row split; train size = round(train_fraction * n).
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, const SplitSpec& spec);

/// Seeded partition of {0..n-1} into k disjoint parts per the scheme:
/// Pooled keeps everything in one part, Equal balances sizes within 1
/// (remainder to the lowest-indexed parts), Random draws a uniform
/// composition with a min_size floor via k-1 sorted cut points.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t n,
                                                        const PartitionSpec& spec);
std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec);

}  // namespace ndcp
