#include "ndcp/federation.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>

#include "ndcp/error.hpp"
#include "ndcp/log.hpp"

namespace ndcp {

namespace {

using Clock = std::chrono::steady_clock;

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

void send_line(int fd, const std::string& line, const TranscriptSink& transcript) {
  if (transcript) transcript(TranscriptDirection::Outbound, line);
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::SourceError, std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

/// Buffered newline framing over a stream socket.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  /// Next complete line (newline stripped). nullopt = deadline passed,
  /// empty optional string never returned; EOF and errors throw.
  std::optional<std::string> read_line(std::optional<Clock::time_point> deadline,
                                       const std::atomic<bool>* stop = nullptr) {
    while (true) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }

      int wait_ms = 200;
      if (deadline) {
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
        if (remaining.count() <= 0) return std::nullopt;
        wait_ms = static_cast<int>(std::min<long long>(remaining.count(), 200));
      }
      if (stop != nullptr && stop->load()) {
        throw Error(ErrorCode::SourceError, "connection aborted");
      }

      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, wait_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::SourceError, std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) continue;

      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::SourceError, std::string("recv failed: ") + std::strerror(errno));
      }
      if (n == 0) throw Error(ErrorCode::SourceError, "connection closed by peer");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  bool has_buffered_line() const { return buffer_.find('\n') != std::string::npos; }

 private:
  int fd_;
  std::string buffer_;
};

void record_inbound(const TranscriptSink& transcript, const std::string& line) {
  if (transcript) transcript(TranscriptDirection::Inbound, line + "\n");
}

}  // namespace

SourceNode::SourceNode(Dataset data, TcpConfig config, SourceNodeOptions options)
    : data_(std::move(data)), config_(config), options_(std::move(options)) {}

SourceNode::~SourceNode() { close_fd(listen_fd_); }

std::uint16_t SourceNode::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) {
    throw Error(ErrorCode::BindFailure, std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::BindFailure, "bad bind address " + options_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    throw Error(ErrorCode::BindFailure,
                "bind " + options_.bind_address + ":" + std::to_string(options_.port) + ": " +
                    std::strerror(errno));
  }
  if (::listen(listen_fd_, 8) < 0) {
    throw Error(ErrorCode::BindFailure, std::string("listen: ") + std::strerror(errno));
  }

  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  return ntohs(bound.sin_port);
}

void SourceNode::run() {
  if (listen_fd_ < 0) start();
  while (!stop_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 200);
    if (ready < 0 && errno != EINTR) {
      throw Error(ErrorCode::BindFailure, std::string("poll: ") + std::strerror(errno));
    }
    if (ready <= 0) continue;
    int client = ::accept(listen_fd_, nullptr, nullptr);
    if (client < 0) continue;
    serve_session(client);
    close_fd(client);
  }
  close_fd(listen_fd_);
}

void SourceNode::request_stop() { stop_.store(true); }

void SourceNode::serve_session(int client_fd) {
  LineReader reader(client_fd);
  while (!stop_.load()) {
    std::optional<std::string> line;
    try {
      line = reader.read_line(std::nullopt, &stop_);
    } catch (const Error&) {
      return;  // peer went away; wait for the next coordinator
    }
    if (!line) continue;
    record_inbound(options_.transcript, *line);

    WireMessage msg;
    try {
      msg = decode_message(*line);
    } catch (const Error& e) {
      send_line(client_fd, encode_message(WireMessage::error(0, e.what())),
                options_.transcript);
      continue;
    }

    switch (msg.type) {
      case WireMessage::Type::Hello:
        if (msg.protocol_version != kProtocolVersion) {
          send_line(client_fd,
                    encode_message(WireMessage::error(
                        0, "unsupported protocol version " +
                               std::to_string(msg.protocol_version))),
                    options_.transcript);
        } else {
          send_line(client_fd, encode_message(WireMessage::hello_ack(data_.n_features())),
                    options_.transcript);
        }
        break;
      case WireMessage::Type::PredictRequest: {
        if (msg.features.size() != data_.n_features()) {
          send_line(client_fd,
                    encode_message(WireMessage::error(
                        msg.request_id,
                        "feature_dim mismatch: got " + std::to_string(msg.features.size()) +
                            ", expected " + std::to_string(data_.n_features()))),
                    options_.transcript);
          break;
        }
        try {
          const PValuePair p = tcp_predict(data_, msg.features, config_, msg.request_id);
          send_line(client_fd,
                    encode_message(WireMessage::predict_response(msg.request_id, p.p0, p.p1)),
                    options_.transcript);
        } catch (const Error& e) {
          send_line(client_fd, encode_message(WireMessage::error(msg.request_id, e.what())),
                    options_.transcript);
        }
        break;
      }
      case WireMessage::Type::Shutdown:
        stop_.store(true);
        return;
      default:
        send_line(client_fd,
                  encode_message(WireMessage::error(
                      msg.request_id, std::string("unexpected message type ") +
                                          wire_type_name(msg.type))),
                  options_.transcript);
        break;
    }
  }
}

void serve_source(SourceNode& node) { node.run(); }

struct Coordinator::Connection {
  explicit Connection(int fd) : fd(fd), reader(fd) {}
  ~Connection() { close_fd(fd); }

  int fd;
  LineReader reader;
};

namespace {

int dial(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "source address needs host:port, got " + address);
  }
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) {
    throw Error(ErrorCode::SourceError,
                "cannot resolve " + address + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    close_fd(fd);
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw Error(ErrorCode::SourceError, "cannot connect to " + address);
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace

Coordinator::Coordinator(std::vector<std::string> source_addresses, CoordinatorOptions options)
    : addresses_(std::move(source_addresses)), options_(std::move(options)) {
  if (addresses_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "coordinator needs at least one source");
  }
}

Coordinator::~Coordinator() = default;

void Coordinator::connect() {
  connections_.clear();
  feature_dim_ = 0;
  const auto deadline = Clock::now() + options_.timeout;
  for (std::size_t k = 0; k < addresses_.size(); ++k) {
    auto conn = std::make_unique<Connection>(dial(addresses_[k]));
    send_line(conn->fd, encode_message(WireMessage::hello(kProtocolVersion)),
              options_.transcript);
    const auto line = conn->reader.read_line(deadline);
    if (!line) {
      throw Error(ErrorCode::SourceTimeout, "no hello_ack from " + addresses_[k]);
    }
    record_inbound(options_.transcript, *line);
    const WireMessage ack = decode_message(*line);
    if (ack.type == WireMessage::Type::Error) {
      throw Error(ErrorCode::SourceError, addresses_[k] + ": " + ack.message);
    }
    if (ack.type != WireMessage::Type::HelloAck) {
      throw Error(ErrorCode::ProtocolError,
                  addresses_[k] + " answered hello with " + wire_type_name(ack.type));
    }
    if (feature_dim_ == 0) {
      feature_dim_ = ack.feature_dim;
    } else if (ack.feature_dim != feature_dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  addresses_[k] + " serves feature_dim " + std::to_string(ack.feature_dim) +
                      ", others serve " + std::to_string(feature_dim_));
    }
    connections_.push_back(std::move(conn));
  }
}

NdcpResult Coordinator::coordinate_predict_detail(std::span<const double> x_new) {
  if (connections_.size() != addresses_.size()) {
    throw Error(ErrorCode::SourceError, "coordinator is not connected");
  }
  if (x_new.size() != feature_dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "query has " + std::to_string(x_new.size()) + " features, sources serve " +
                    std::to_string(feature_dim_));
  }

  const std::uint64_t request_id = next_request_id_++;
  const std::string request = encode_message(
      WireMessage::predict_request(request_id, {x_new.begin(), x_new.end()}));
  for (auto& conn : connections_) send_line(conn->fd, request, options_.transcript);

  const auto deadline = Clock::now() + options_.timeout;
  std::vector<std::optional<PValuePair>> responses(connections_.size());
  std::size_t outstanding = connections_.size();
  while (outstanding > 0) {
    bool progressed = false;
    for (std::size_t k = 0; k < connections_.size(); ++k) {
      if (responses[k]) continue;
      auto& conn = *connections_[k];
      // Drain buffered lines first, then give the socket a short slice.
      std::optional<std::string> line;
      if (conn.reader.has_buffered_line()) {
        line = conn.reader.read_line(Clock::now());
      } else {
        const auto slice = std::min(deadline, Clock::now() + std::chrono::milliseconds(20));
        try {
          line = conn.reader.read_line(slice);
        } catch (const Error& e) {
          throw Error(ErrorCode::SourceError, addresses_[k] + ": " + e.what());
        }
      }
      if (!line) continue;
      record_inbound(options_.transcript, *line);
      const WireMessage msg = decode_message(*line);
      if (msg.type == WireMessage::Type::Error) {
        throw Error(ErrorCode::SourceError, addresses_[k] + ": " + msg.message);
      }
      if (msg.type != WireMessage::Type::PredictResponse || msg.request_id != request_id) {
        throw Error(ErrorCode::ProtocolError,
                    addresses_[k] + " sent an unexpected " + wire_type_name(msg.type));
      }
      responses[k] = PValuePair{msg.p0, msg.p1};
      --outstanding;
      progressed = true;
    }
    if (outstanding > 0 && !progressed && Clock::now() >= deadline) {
      std::string silent;
      for (std::size_t k = 0; k < responses.size(); ++k) {
        if (!responses[k]) {
          if (!silent.empty()) silent += ", ";
          silent += addresses_[k];
        }
      }
      throw Error(ErrorCode::SourceTimeout, "no response from: " + silent);
    }
  }

  NdcpResult result;
  result.per_source.reserve(responses.size());
  for (const auto& r : responses) result.per_source.push_back(*r);
  result.aggregated = aggregate_pvalues(result.per_source);
  return result;
}

PValuePair Coordinator::coordinate_predict(std::span<const double> x_new) {
  return coordinate_predict_detail(x_new).aggregated;
}

void Coordinator::shutdown_sources() {
  for (auto& conn : connections_) {
    if (!conn) continue;
    try {
      send_line(conn->fd, encode_message(WireMessage::shutdown()), options_.transcript);
    } catch (const Error& e) {
      NDCP_LOG_WARN("shutdown notify failed: %s", e.what());
    }
  }
  connections_.clear();
}

}  // namespace ndcp
