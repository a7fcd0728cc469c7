#include "ndcp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ndcp/error.hpp"
#include "ndcp/log.hpp"
#include "ndcp/seed.hpp"

namespace ndcp {

Dataset::Dataset(std::vector<double> features, std::vector<std::uint8_t> labels,
                 std::size_t n_features, std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      n_features_(n_features),
      feature_names_(std::move(feature_names)) {
  if (labels_.empty() || n_features_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "dataset needs n >= 1 and p >= 1");
  }
  if (features_.size() != labels_.size() * n_features_) {
    throw Error(ErrorCode::InvalidArgument, "feature matrix shape does not match label count");
  }
  for (std::uint8_t y : labels_) {
    if (y > 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
  }
  if (!feature_names_.empty() && feature_names_.size() != n_features_) {
    throw Error(ErrorCode::InvalidArgument, "feature name count does not match width");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> feats;
  feats.reserve(indices.size() * n_features_);
  std::vector<std::uint8_t> labs;
  labs.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto r = row(i);
    feats.insert(feats.end(), r.begin(), r.end());
    labs.push_back(labels_[i]);
  }
  return Dataset(std::move(feats), std::move(labs), n_features_, feature_names_);
}

Dataset Dataset::with_appended(std::span<const double> x, std::uint8_t label) const {
  if (x.size() != n_features_) {
    throw Error(ErrorCode::DimensionMismatch, "appended row has wrong width");
  }
  std::vector<double> feats = features_;
  feats.insert(feats.end(), x.begin(), x.end());
  std::vector<std::uint8_t> labs = labels_;
  labs.push_back(label);
  return Dataset(std::move(feats), std::move(labs), n_features_, feature_names_);
}

std::size_t Dataset::class_count(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

namespace {

// RFC-4180 field splitting for one record. Quoted fields may contain commas
// and doubled quotes. Trailing \r from CRLF files is stripped by the caller.
std::vector<std::string> split_csv_record(const std::string& line, std::size_t row_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::MalformedRow,
                "unterminated quote in row " + std::to_string(row_no));
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?"; }

std::vector<std::vector<std::string>> read_records(const std::string& path,
                                                   std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::vector<std::string>> records;
  std::string line;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row_no == 0 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
      line.erase(0, 3);  // UTF-8 BOM
    }
    if (line.empty() && row_no > 0) {
      ++row_no;
      continue;
    }
    auto fields = split_csv_record(line, row_no);
    if (row_no == 0) {
      header = std::move(fields);
    } else {
      if (fields.size() != header.size()) {
        throw Error(ErrorCode::MalformedRow,
                    "row " + std::to_string(row_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
      }
      records.push_back(std::move(fields));
    }
    ++row_no;
  }
  if (header.empty() || records.empty()) {
    throw Error(ErrorCode::EmptyFile, path + " has no data rows");
  }
  return records;
}

}  // namespace

std::size_t CsvSchema::encoded_width() const {
  std::size_t w = 0;
  for (const auto& col : columns) {
    if (col.is_numeric || encoding == CategoricalEncoding::Ordinal) {
      w += 1;
    } else {
      w += col.levels.size();
    }
  }
  return w;
}

LoadResult load_csv_with_schema(const std::string& path, const std::string& label_column,
                                CategoricalEncoding encoding) {
  std::vector<std::string> header;
  auto records = read_records(path, header);

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw Error(ErrorCode::MissingColumn, "label column '" + label_column + "' not in header");
  }
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());

  // Drop rows with missing cells before typing the columns.
  std::size_t dropped = 0;
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (auto& rec : records) {
    const bool missing = std::any_of(rec.begin(), rec.end(),
                                     [](const std::string& c) { return is_missing(c); });
    if (missing) {
      ++dropped;
    } else {
      rows.push_back(std::move(rec));
    }
  }
  if (dropped > 0) {
    NDCP_LOG_WARN("%s: dropped %zu row(s) with missing cells", path.c_str(), dropped);
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyFile, path + " has no complete rows");

  std::set<std::string> label_values;
  for (const auto& r : rows) label_values.insert(r[label_idx]);
  if (label_values.size() != 2) {
    throw Error(ErrorCode::NonBinaryLabel,
                "label column has " + std::to_string(label_values.size()) +
                    " distinct values, expected 2");
  }

  CsvSchema schema;
  schema.label_column = label_column;
  schema.label_levels.assign(label_values.begin(), label_values.end());
  schema.encoding = encoding;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_idx) continue;
    CsvColumn col;
    col.name = header[c];
    double tmp;
    col.is_numeric = std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
      return parse_double(r[c], tmp);
    });
    if (!col.is_numeric) {
      std::set<std::string> levels;
      for (const auto& r : rows) levels.insert(r[c]);
      col.levels.assign(levels.begin(), levels.end());
    }
    schema.columns.push_back(std::move(col));
  }

  const std::size_t width = schema.encoded_width();
  std::vector<double> feats;
  feats.reserve(rows.size() * width);
  std::vector<std::uint8_t> labels;
  labels.reserve(rows.size());
  for (const auto& r : rows) {
    std::size_t c = 0;
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (h == label_idx) continue;
      const CsvColumn& col = schema.columns[c++];
      const std::string& cell = r[h];
      if (col.is_numeric) {
        double v;
        parse_double(cell, v);
        feats.push_back(v);
      } else {
        const auto it = std::lower_bound(col.levels.begin(), col.levels.end(), cell);
        const auto level = static_cast<std::size_t>(it - col.levels.begin());
        if (encoding == CategoricalEncoding::Ordinal) {
          feats.push_back(static_cast<double>(level));
        } else {
          for (std::size_t l = 0; l < col.levels.size(); ++l) {
            feats.push_back(l == level ? 1.0 : 0.0);
          }
        }
      }
    }
    labels.push_back(r[label_idx] == schema.label_levels[1] ? 1 : 0);
  }

  std::vector<std::string> names;
  names.reserve(width);
  for (const auto& col : schema.columns) {
    if (col.is_numeric || encoding == CategoricalEncoding::Ordinal) {
      names.push_back(col.name);
    } else {
      for (const auto& level : col.levels) names.push_back(col.name + "=" + level);
    }
  }

  return LoadResult{Dataset(std::move(feats), std::move(labels), width, std::move(names)),
                    std::move(schema), dropped};
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 CategoricalEncoding encoding) {
  return load_csv_with_schema(path, label_column, encoding).data;
}

std::vector<std::vector<double>> load_query_csv(const std::string& path,
                                                const CsvSchema& schema) {
  std::vector<std::string> header;
  auto records = read_records(path, header);
  if (header.size() != schema.columns.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query file has " + std::to_string(header.size()) +
                    " columns, schema expects " + std::to_string(schema.columns.size()));
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema.columns[c].name) {
      throw Error(ErrorCode::MissingColumn,
                  "query column '" + header[c] + "' does not match schema column '" +
                      schema.columns[c].name + "'");
    }
  }

  std::vector<std::vector<double>> out;
  out.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::vector<double> x;
    x.reserve(schema.encoded_width());
    for (std::size_t c = 0; c < header.size(); ++c) {
      const CsvColumn& col = schema.columns[c];
      const std::string& cell = records[r][c];
      if (is_missing(cell)) {
        throw Error(ErrorCode::MalformedRow,
                    "missing cell in query row " + std::to_string(r + 1));
      }
      if (col.is_numeric) {
        double v;
        if (!parse_double(cell, v)) {
          throw Error(ErrorCode::MalformedRow,
                      "non-numeric cell in query row " + std::to_string(r + 1));
        }
        x.push_back(v);
      } else {
        const auto it = std::lower_bound(col.levels.begin(), col.levels.end(), cell);
        if (it == col.levels.end() || *it != cell) {
          throw Error(ErrorCode::MalformedRow, "unknown level '" + cell + "' in query row " +
                                                   std::to_string(r + 1));
        }
        const auto level = static_cast<std::size_t>(it - col.levels.begin());
        if (schema.encoding == CategoricalEncoding::Ordinal) {
          x.push_back(static_cast<double>(level));
        } else {
          for (std::size_t l = 0; l < col.levels.size(); ++l) {
            x.push_back(l == level ? 1.0 : 0.0);
          }
        }
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must be in (0,1)");
  }
  const auto train_size =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  if (train_size == 0 || train_size >= n) {
    throw Error(ErrorCode::DegenerateSplit,
                "split of n=" + std::to_string(n) + " leaves an empty side");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, "train_test_split"));
  rng.shuffle(idx);
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_size));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(train_size), idx.end());
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, const SplitSpec& spec) {
  const auto idx = split_indices(data.n_rows(), spec);
  return {data.subset(idx.train), data.subset(idx.test)};
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t n,
                                                        const PartitionSpec& spec) {
  if (spec.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");

  std::vector<std::size_t> sizes;
  switch (spec.scheme) {
    case PartitionScheme::Pooled: {
      if (spec.k != 1) {
        throw Error(ErrorCode::InvalidArgument, "pooled scheme requires k = 1");
      }
      sizes.assign(1, n);
      break;
    }
    case PartitionScheme::Equal: {
      if (spec.k > n) {
        throw Error(ErrorCode::InfeasiblePartition,
                    "cannot split " + std::to_string(n) + " rows into " +
                        std::to_string(spec.k) + " non-empty parts");
      }
      const std::size_t base = n / spec.k;
      const std::size_t rem = n % spec.k;
      for (std::size_t i = 0; i < spec.k; ++i) sizes.push_back(base + (i < rem ? 1 : 0));
      break;
    }
    case PartitionScheme::Random: {
      if (spec.min_size == 0) {
        throw Error(ErrorCode::InvalidArgument, "min_size must be positive");
      }
      if (spec.k * spec.min_size > n) {
        throw Error(ErrorCode::InfeasiblePartition,
                    "k*min_size = " + std::to_string(spec.k * spec.min_size) + " exceeds n = " +
                        std::to_string(n));
      }
      // Uniform composition of the slack above the floor: k-1 sorted cut
      // points over [0, n - k*min_size], differences + floor give the sizes.
      const std::uint64_t slack = n - spec.k * spec.min_size;
      Rng rng(derive_seed(spec.seed, "partition_sizes"));
      std::vector<std::uint64_t> cuts(spec.k - 1);
      for (auto& c : cuts) c = rng.bounded(slack + 1);
      std::sort(cuts.begin(), cuts.end());
      std::uint64_t prev = 0;
      for (std::size_t i = 0; i < spec.k; ++i) {
        const std::uint64_t next = (i + 1 < spec.k) ? cuts[i] : slack;
        sizes.push_back(spec.min_size + static_cast<std::size_t>(next - prev));
        prev = next;
      }
      break;
    }
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (spec.scheme != PartitionScheme::Pooled) {
    Rng rng(derive_seed(spec.seed, "partition_rows"));
    rng.shuffle(idx);
  }

  std::vector<std::vector<std::size_t>> parts;
  parts.reserve(spec.k);
  std::size_t offset = 0;
  for (std::size_t s : sizes) {
    parts.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(offset),
                       idx.begin() + static_cast<std::ptrdiff_t>(offset + s));
    offset += s;
  }
  return parts;
}

std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec) {
  const auto parts = partition_indices(data.n_rows(), spec);
  std::vector<Dataset> out;
  out.reserve(parts.size());
  for (const auto& p : parts) out.push_back(data.subset(p));
  return out;
}

}  // namespace ndcp
