#pragma once

#include <span>
#include <vector>

#include "ndcp/conformal.hpp"
#include "ndcp/dataset.hpp"

namespace ndcp {

/// One non-disclosing data source: private training data plus the TCP
/// configuration (seeds included) it answers queries with.
struct Source {
  Dataset data;
  TcpConfig config;
};

struct SourceEnsemble {
  std::vector<Source> sources;

  explicit SourceEnsemble(std::vector<Source> srcs);

  std::size_t size() const { return sources.size(); }
  std::size_t n_features() const { return sources.front().data.n_features(); }
};

/// Unweighted mean of p0 and p1 across the list, summed in list order.
PValuePair aggregate_pvalues(std::span<const PValuePair> pairs);

struct NdcpResult {
  PValuePair aggregated;
  std::vector<PValuePair> per_source;  // ordered by source index
};

/// Runs tcp_predict independently at every source (no source ever sees
/// another source's rows) and averages the resulting p-values.
NdcpResult ndcp_predict_detail(const SourceEnsemble& ensemble, std::span<const double> x_new,
                               std::uint64_t test_index = 0);

PValuePair ndcp_predict(const SourceEnsemble& ensemble, std::span<const double> x_new,
                        std::uint64_t test_index = 0);

}  // namespace ndcp
