#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>

namespace pinfer::net {

// Reliable ordered byte stream. Counters record raw bytes as they cross the
// stream boundary and are the independent measurement CommStats is checked
// against.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  virtual void read_exact(std::span<std::uint8_t> out) = 0;
  virtual void close() = 0;

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
  std::chrono::milliseconds timeout() const { return timeout_; }
  std::uint64_t bytes_sent() const { return sent_; }
  std::uint64_t bytes_received() const { return received_; }

 protected:
  std::chrono::milliseconds timeout_{30000};
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);  // "host:port"
  std::string str() const;
};

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(int fd);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void write_all(std::span<const std::uint8_t> data) override;
  void read_exact(std::span<std::uint8_t> out) override;
  void close() override;

 private:
  int fd_;
};

// Connects within the timeout, retrying refused connections until the
// deadline; throws kTimeout when the peer never becomes reachable.
std::unique_ptr<Transport> tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout);

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Returns nullptr when no connection arrives within the timeout.
  std::unique_ptr<Transport> accept(std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Connected in-memory pair for tests and in-process runs.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_pipe();

// Wraps a transport and flips one bit of the n-th byte written through it.
class FaultyTransport final : public Transport {
 public:
  FaultyTransport(std::unique_ptr<Transport> inner, std::uint64_t corrupt_offset, std::uint8_t mask = 0x01);

  void write_all(std::span<const std::uint8_t> data) override;
  void read_exact(std::span<std::uint8_t> out) override;
  void close() override { inner_->close(); }

 private:
  std::unique_ptr<Transport> inner_;
  std::uint64_t corrupt_offset_;
  std::uint8_t mask_;
};

}  // namespace pinfer::net
