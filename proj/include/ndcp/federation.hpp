#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ndcp/aggregate.hpp"
#include "ndcp/conformal.hpp"
#include "ndcp/dataset.hpp"
#include "ndcp/wire.hpp"

namespace ndcp {

enum class TranscriptDirection { Inbound, Outbound };

/// Receives every raw protocol line exactly as it crossed the wire
/// (newline included). Used to audit that nothing beyond the closed
/// schema is ever transmitted.
using TranscriptSink = std::function<void(TranscriptDirection, std::string_view)>;

struct SourceNodeOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  TranscriptSink transcript;
};

/// One data source: holds its dataset privately and answers p-value
/// queries over the wire protocol. The dataset never leaves this process;
/// this module has no serialization path for it.
class SourceNode {
 public:
  SourceNode(Dataset data, TcpConfig config, SourceNodeOptions options = {});
  ~SourceNode();

  SourceNode(const SourceNode&) = delete;
  SourceNode& operator=(const SourceNode&) = delete;

  /// Binds and listens; returns the actual port.
  std::uint16_t start();

  /// Serves coordinator sessions until a shutdown message arrives.
  void run();

  /// Unblocks run() from another thread (used when no shutdown arrives).
  void request_stop();

  std::size_t feature_dim() const { return data_.n_features(); }

 private:
  void serve_session(int client_fd);

  Dataset data_;
  TcpConfig config_;
  SourceNodeOptions options_;
  int listen_fd_ = -1;
  std::atomic<bool> stop_{false};
};

/// Spec-level entry point: serve until shutdown.
void serve_source(SourceNode& node);

struct CoordinatorOptions {
  std::chrono::milliseconds timeout{60000};  // per prediction; TCP retrains 2 forests
  TranscriptSink transcript;
};

/// The aggregation point: fans a query object out to every source and
/// averages the returned p-values. Sees only query features and p-values.
class Coordinator {
 public:
  explicit Coordinator(std::vector<std::string> source_addresses,
                       CoordinatorOptions options = {});
  ~Coordinator();

  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  /// Dials every source and handshakes; all feature_dims must agree.
  void connect();

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t source_count() const { return addresses_.size(); }

  /// Sends one predict_request (fresh monotonically increasing request id)
  /// to all sources and aggregates the K responses. Response arrival order
  /// is irrelevant; requests are matched by id.
  PValuePair coordinate_predict(std::span<const double> x_new);

  NdcpResult coordinate_predict_detail(std::span<const double> x_new);

  /// Asks every source to exit, then closes the connections.
  void shutdown_sources();

 private:
  struct Connection;

  std::vector<std::string> addresses_;
  CoordinatorOptions options_;
  std::vector<std::unique_ptr<Connection>> connections_;
  std::size_t feature_dim_ = 0;
  std::uint64_t next_request_id_ = 0;
};

}  // namespace ndcp
