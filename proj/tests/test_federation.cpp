#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ndcp/error.hpp"
#include "ndcp/federation.hpp"
#include "ndcp/seed.hpp"
#include "support/synthetic.hpp"

using namespace ndcp;

namespace {

TcpConfig tcp_config(std::size_t trees, std::uint64_t seed) {
  TcpConfig cfg;
  cfg.forest.n_trees = trees;
  cfg.forest.seed = derive_seed(seed, "forest");
  cfg.smoothing_seed = derive_seed(seed, "tau");
  return cfg;
}

/// Blocking scripted client for driving a SourceNode directly.
class RawClient {
 public:
  explicit RawClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd_ >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  }
  ~RawClient() { ::close(fd_); }

  void send_line(const std::string& line) {
    REQUIRE(::send(fd_, line.data(), line.size(), 0) ==
            static_cast<ssize_t>(line.size()));
  }

  std::string read_line() {
    while (buffer_.find('\n') == std::string::npos) {
      char chunk[1024];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      REQUIRE(n > 0);
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    const auto pos = buffer_.find('\n');
    std::string line = buffer_.substr(0, pos);
    buffer_.erase(0, pos + 1);
    return line;
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// Stub source speaking just enough protocol to exercise the coordinator.
class StubSource {
 public:
  enum class Mode { Fixed, Silent, ErrorReply };

  StubSource(std::size_t dim, PValuePair reply, Mode mode = Mode::Fixed, int delay_ms = 0)
      : dim_(dim), reply_(reply), mode_(mode), delay_ms_(delay_ms) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(listen_fd_ >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    REQUIRE(::listen(listen_fd_, 1) == 0);
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }

  ~StubSource() {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (thread_.joinable()) thread_.join();
  }

  std::string address() const { return "127.0.0.1:" + std::to_string(port_); }

 private:
  void serve() {
    const int client = ::accept(listen_fd_, nullptr, nullptr);
    if (client < 0) return;
    std::string buffer;
    char chunk[1024];
    while (true) {
      auto pos = buffer.find('\n');
      while (pos == std::string::npos) {
        const ssize_t n = ::recv(client, chunk, sizeof(chunk), 0);
        if (n <= 0) {
          ::close(client);
          return;
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
        pos = buffer.find('\n');
      }
      const std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);

      WireMessage msg;
      try {
        msg = decode_message(line);
      } catch (const Error&) {
        continue;
      }
      if (msg.type == WireMessage::Type::Hello) {
        const std::string out = encode_message(WireMessage::hello_ack(dim_));
        ::send(client, out.data(), out.size(), 0);
      } else if (msg.type == WireMessage::Type::PredictRequest) {
        if (mode_ == Mode::Silent) continue;
        if (delay_ms_ > 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
        }
        const std::string out =
            mode_ == Mode::ErrorReply
                ? encode_message(WireMessage::error(msg.request_id, "stub failure"))
                : encode_message(
                      WireMessage::predict_response(msg.request_id, reply_.p0, reply_.p1));
        ::send(client, out.data(), out.size(), 0);
      } else if (msg.type == WireMessage::Type::Shutdown) {
        ::close(client);
        return;
      }
    }
  }

  std::size_t dim_;
  PValuePair reply_;
  Mode mode_;
  int delay_ms_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread thread_;
};

struct RunningNode {
  explicit RunningNode(Dataset data, TcpConfig cfg, SourceNodeOptions options = {})
      : node(std::move(data), cfg, std::move(options)) {
    port = node.start();
    thread = std::thread([this] { node.run(); });
  }
  ~RunningNode() {
    node.request_stop();
    if (thread.joinable()) thread.join();
  }

  SourceNode node;
  std::uint16_t port = 0;
  std::thread thread;
};

}  // namespace

TEST_CASE("a scripted session matches direct tcp_predict calls") {
  const Dataset data = ndcp::testing::two_gaussian(24, 2, 1.0, 5);
  const TcpConfig cfg = tcp_config(6, 77);
  RunningNode running(data, cfg);

  RawClient client(running.port);
  client.send_line(encode_message(WireMessage::hello(kProtocolVersion)));
  const WireMessage ack = decode_message(client.read_line());
  REQUIRE(ack.type == WireMessage::Type::HelloAck);
  CHECK(ack.feature_dim == 2);

  for (std::uint64_t id = 0; id < 3; ++id) {
    const std::vector<double> x{0.2 * static_cast<double>(id), -0.1};
    client.send_line(encode_message(WireMessage::predict_request(id, x)));
    const WireMessage resp = decode_message(client.read_line());
    REQUIRE(resp.type == WireMessage::Type::PredictResponse);
    CHECK(resp.request_id == id);
    const PValuePair direct = tcp_predict(data, x, cfg, id);
    CHECK(resp.p0 == direct.p0);
    CHECK(resp.p1 == direct.p1);
  }

  // Wrong feature_dim: error reply, connection stays usable.
  client.send_line(encode_message(WireMessage::predict_request(9, {1.0})));
  const WireMessage err = decode_message(client.read_line());
  REQUIRE(err.type == WireMessage::Type::Error);
  CHECK(err.request_id == 9);
  client.send_line(encode_message(WireMessage::predict_request(10, {0.0, 0.0})));
  CHECK(decode_message(client.read_line()).type == WireMessage::Type::PredictResponse);

  // Clean exit on shutdown.
  client.send_line(encode_message(WireMessage::shutdown()));
  running.thread.join();
  CHECK_FALSE(running.thread.joinable());
}

TEST_CASE("coordinator averages stubbed sources") {
  StubSource s1(3, {0.3, 0.9});
  StubSource s2(3, {0.6, 0.6});
  StubSource s3(3, {0.0, 0.0});
  Coordinator coordinator({s1.address(), s2.address(), s3.address()});
  coordinator.connect();
  CHECK(coordinator.feature_dim() == 3);
  const PValuePair p = coordinator.coordinate_predict(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(p.p0 == doctest::Approx(0.3));
  CHECK(p.p1 == doctest::Approx(0.5));
  coordinator.shutdown_sources();
}

TEST_CASE("response arrival order does not matter") {
  StubSource fast(2, {0.2, 0.4}, StubSource::Mode::Fixed, 0);
  StubSource slow(2, {0.8, 0.6}, StubSource::Mode::Fixed, 150);
  Coordinator coordinator({slow.address(), fast.address()});
  coordinator.connect();
  const NdcpResult r = coordinator.coordinate_predict_detail(std::vector<double>{0.0, 0.0});
  // Responses map back to source positions even though fast replied first.
  CHECK(r.per_source[0].p0 == 0.8);
  CHECK(r.per_source[1].p0 == 0.2);
  CHECK(r.aggregated.p0 == doctest::Approx(0.5));
  coordinator.shutdown_sources();
}

TEST_CASE("silent sources raise a timeout naming them") {
  StubSource ok(2, {0.5, 0.5});
  StubSource silent(2, {0.0, 0.0}, StubSource::Mode::Silent);
  CoordinatorOptions options;
  options.timeout = std::chrono::milliseconds(400);
  Coordinator coordinator({ok.address(), silent.address()}, options);
  coordinator.connect();
  try {
    coordinator.coordinate_predict(std::vector<double>{0.0, 0.0});
    FAIL("expected SourceTimeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceTimeout);
    CHECK(std::string(e.what()).find(silent.address()) != std::string::npos);
    CHECK(std::string(e.what()).find(ok.address()) == std::string::npos);
  }
}

TEST_CASE("source error replies surface as SourceError") {
  StubSource ok(2, {0.5, 0.5});
  StubSource broken(2, {0.0, 0.0}, StubSource::Mode::ErrorReply);
  Coordinator coordinator({ok.address(), broken.address()});
  coordinator.connect();
  try {
    coordinator.coordinate_predict(std::vector<double>{0.0, 0.0});
    FAIL("expected SourceError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceError);
    CHECK(std::string(e.what()).find("stub failure") != std::string::npos);
  }
}

TEST_CASE("handshake rejects inconsistent feature dimensions") {
  StubSource a(2, {0.5, 0.5});
  StubSource b(3, {0.5, 0.5});
  Coordinator coordinator({a.address(), b.address()});
  try {
    coordinator.connect();
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("loopback federation equals in-process ndcp bit-exactly") {
  const Dataset full = ndcp::testing::two_gaussian(60, 2, 1.0, 21);
  const auto parts = partition(full, {PartitionScheme::Equal, 2, 10, 9});

  std::vector<Source> sources;
  std::vector<std::unique_ptr<RunningNode>> nodes;
  std::vector<std::string> addresses;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const TcpConfig cfg = tcp_config(6, derive_seed(1000, k));
    sources.push_back({parts[k], cfg});
    nodes.push_back(std::make_unique<RunningNode>(parts[k], cfg));
    addresses.push_back("127.0.0.1:" + std::to_string(nodes.back()->port));
  }
  const SourceEnsemble ensemble(sources);

  Coordinator coordinator(addresses);
  coordinator.connect();
  for (std::uint64_t i = 0; i < 5; ++i) {
    const std::vector<double> x{0.3 * static_cast<double>(i) - 0.5, 0.1};
    const PValuePair wire = coordinator.coordinate_predict(x);
    const PValuePair local = ndcp_predict(ensemble, x, i);
    CHECK(wire.p0 == local.p0);
    CHECK(wire.p1 == local.p1);
  }
  coordinator.shutdown_sources();
}

TEST_CASE("transcripts contain only schema lines and no training bytes") {
  // Sentinel feature value planted in training rows must never appear on
  // the wire; every line must decode under the closed schema.
  const double sentinel = 87654.321;
  std::vector<double> feats;
  std::vector<std::uint8_t> labels;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    feats.push_back(rng.normal() + (i % 2 == 0 ? -1.0 : 1.0));
    feats.push_back(sentinel);
    labels.push_back(static_cast<std::uint8_t>(i % 2));
  }
  const Dataset data(std::move(feats), std::move(labels), 2);

  std::mutex mutex;
  std::string transcript;
  SourceNodeOptions options;
  options.transcript = [&](TranscriptDirection, std::string_view line) {
    std::lock_guard<std::mutex> lock(mutex);
    transcript.append(line);
  };
  RunningNode node(data, tcp_config(4, 3), options);

  Coordinator coordinator({"127.0.0.1:" + std::to_string(node.port)});
  coordinator.connect();
  coordinator.coordinate_predict(std::vector<double>{0.5, 1.5});
  coordinator.shutdown_sources();
  node.thread.join();

  std::lock_guard<std::mutex> lock(mutex);
  CHECK(transcript.find("87654") == std::string::npos);
  std::size_t lines = 0;
  std::size_t pos = 0;
  while (pos < transcript.size()) {
    const auto eol = transcript.find('\n', pos);
    REQUIRE(eol != std::string::npos);
    CHECK_NOTHROW(decode_message(transcript.substr(pos, eol - pos)));
    pos = eol + 1;
    ++lines;
  }
  CHECK(lines >= 4);  // hello, hello_ack, request, response, shutdown
}
