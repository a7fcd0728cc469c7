#include "ndcp/aggregate.hpp"

#include <string>

#include "ndcp/error.hpp"

namespace ndcp {

SourceEnsemble::SourceEnsemble(std::vector<Source> srcs) : sources(std::move(srcs)) {
  if (sources.empty()) {
    throw Error(ErrorCode::InvalidArgument, "ensemble needs at least one source");
  }
  const std::size_t dim = sources.front().data.n_features();
  for (std::size_t k = 1; k < sources.size(); ++k) {
    if (sources[k].data.n_features() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "source " + std::to_string(k) + " has feature dimension " +
                      std::to_string(sources[k].data.n_features()) + ", expected " +
                      std::to_string(dim));
    }
  }
}

PValuePair aggregate_pvalues(std::span<const PValuePair> pairs) {
  if (pairs.empty()) {
    throw Error(ErrorCode::EmptyList, "cannot aggregate an empty p-value list");
  }
  double sum0 = 0.0;
  double sum1 = 0.0;
  for (const PValuePair& p : pairs) {
    sum0 += p.p0;
    sum1 += p.p1;
  }
  const auto k = static_cast<double>(pairs.size());
  return {sum0 / k, sum1 / k};
}

NdcpResult ndcp_predict_detail(const SourceEnsemble& ensemble, std::span<const double> x_new,
                               std::uint64_t test_index) {
  NdcpResult result;
  result.per_source.reserve(ensemble.size());
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const Source& src = ensemble.sources[k];
    try {
      result.per_source.push_back(tcp_predict(src.data, x_new, src.config, test_index));
    } catch (const Error& e) {
      throw Error(e.code(), "source " + std::to_string(k) + ": " + e.what());
    }
  }
  result.aggregated = aggregate_pvalues(result.per_source);
  return result;
}

PValuePair ndcp_predict(const SourceEnsemble& ensemble, std::span<const double> x_new,
                        std::uint64_t test_index) {
  return ndcp_predict_detail(ensemble, x_new, test_index).aggregated;
}

}  // namespace ndcp
