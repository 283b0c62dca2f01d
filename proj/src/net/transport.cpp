#include "pinfer/net/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "pinfer/common/error.hpp"

namespace pinfer::net {

namespace {

using Clock = std::chrono::steady_clock;

std::string sys_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kNetwork, "cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

int poll_one(int fd, short events, int timeout_ms) {
  pollfd p{fd, events, 0};
  for (;;) {
    int r = ::poll(&p, 1, timeout_ms);
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) fail(ErrorCode::kNetwork, sys_error("poll"));
    return r;
  }
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::kInvalidArgument, "endpoint must be host:port, got " + text);
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  try {
    const unsigned long port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, "invalid port in endpoint " + text);
  }
  return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

TcpTransport::TcpTransport(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpTransport::write_all(std::span<const std::uint8_t> data) {
  if (fd_ < 0) fail(ErrorCode::kChannelClosed, "write on closed socket");
  std::size_t off = 0;
  const auto deadline = Clock::now() + timeout_;
  while (off < data.size()) {
    ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
      sent_ += static_cast<std::uint64_t>(n);
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0 || poll_one(fd_, POLLOUT, static_cast<int>(left.count())) == 0) {
        fail(ErrorCode::kTimeout, "send timed out");
      }
      continue;
    }
    if (n < 0 && (errno == EPIPE || errno == ECONNRESET)) fail(ErrorCode::kChannelClosed, "peer closed connection");
    fail(ErrorCode::kNetwork, sys_error("send"));
  }
}

void TcpTransport::read_exact(std::span<std::uint8_t> out) {
  if (fd_ < 0) fail(ErrorCode::kChannelClosed, "read on closed socket");
  std::size_t off = 0;
  const auto deadline = Clock::now() + timeout_;
  while (off < out.size()) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0 || poll_one(fd_, POLLIN, static_cast<int>(left.count())) == 0) {
      fail(ErrorCode::kTimeout, "no data from peer within " + std::to_string(timeout_.count()) + " ms");
    }
    ssize_t n = ::recv(fd_, out.data() + off, out.size() - off, 0);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
      received_ += static_cast<std::uint64_t>(n);
      continue;
    }
    if (n == 0) fail(ErrorCode::kChannelClosed, "peer closed connection");
    if (errno == EINTR || errno == EAGAIN) continue;
    if (errno == ECONNRESET) fail(ErrorCode::kChannelClosed, "connection reset");
    fail(ErrorCode::kNetwork, sys_error("recv"));
  }
}

std::unique_ptr<Transport> tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(ep);
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) fail(ErrorCode::kNetwork, sys_error("socket"));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      auto t = std::make_unique<TcpTransport>(fd);
      t->set_timeout(timeout);
      return t;
    }
    const int err = errno;
    ::close(fd);
    if (err != ECONNREFUSED && err != ETIMEDOUT && err != EHOSTUNREACH && err != ENETUNREACH) {
      errno = err;
      fail(ErrorCode::kNetwork, sys_error(("connect to " + ep.str()).c_str()));
    }
    if (Clock::now() + std::chrono::milliseconds(50) >= deadline) {
      fail(ErrorCode::kTimeout, "could not reach " + ep.str() + " within " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

TcpListener::TcpListener(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail(ErrorCode::kNetwork, sys_error("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
    const std::string msg = sys_error(("bind " + ep.str()).c_str());
    ::close(fd_);
    fd_ = -1;
    fail(ErrorCode::kBindFailure, msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Transport> TcpListener::accept(std::chrono::milliseconds timeout) {
  if (fd_ < 0) fail(ErrorCode::kChannelClosed, "listener closed");
  if (poll_one(fd_, POLLIN, static_cast<int>(timeout.count())) == 0) return nullptr;
  int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) {
    if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED) return nullptr;
    fail(ErrorCode::kNetwork, sys_error("accept"));
  }
  return std::make_unique<TcpTransport>(fd);
}

namespace {

struct PipeBuffer {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> chunks;
  std::size_t head_offset = 0;
  bool closed = false;
};

class MemoryTransport final : public Transport {
 public:
  MemoryTransport(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryTransport() override { close(); }

  void write_all(std::span<const std::uint8_t> data) override {
    std::lock_guard lk(out_->mu);
    if (out_->closed) fail(ErrorCode::kChannelClosed, "peer closed pipe");
    out_->chunks.emplace_back(data.begin(), data.end());
    sent_ += data.size();
    out_->cv.notify_all();
  }

  void read_exact(std::span<std::uint8_t> out) override {
    std::unique_lock lk(in_->mu);
    std::size_t off = 0;
    const auto deadline = Clock::now() + timeout_;
    while (off < out.size()) {
      if (in_->chunks.empty()) {
        if (in_->closed) fail(ErrorCode::kChannelClosed, "peer closed pipe");
        if (!in_->cv.wait_until(lk, deadline, [&] { return !in_->chunks.empty() || in_->closed; })) {
          fail(ErrorCode::kTimeout, "no data from peer within " + std::to_string(timeout_.count()) + " ms");
        }
        continue;
      }
      auto& front = in_->chunks.front();
      const std::size_t take = std::min(out.size() - off, front.size() - in_->head_offset);
      std::memcpy(out.data() + off, front.data() + in_->head_offset, take);
      off += take;
      in_->head_offset += take;
      if (in_->head_offset == front.size()) {
        in_->chunks.pop_front();
        in_->head_offset = 0;
      }
    }
    received_ += out.size();
  }

  void close() override {
    for (auto* b : {in_.get(), out_.get()}) {
      std::lock_guard lk(b->mu);
      b->closed = true;
      b->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<PipeBuffer> in_, out_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_pipe() {
  auto a = std::make_shared<PipeBuffer>();
  auto b = std::make_shared<PipeBuffer>();
  return {std::make_unique<MemoryTransport>(a, b), std::make_unique<MemoryTransport>(b, a)};
}

FaultyTransport::FaultyTransport(std::unique_ptr<Transport> inner, std::uint64_t corrupt_offset, std::uint8_t mask)
    : inner_(std::move(inner)), corrupt_offset_(corrupt_offset), mask_(mask) {
  timeout_ = inner_->timeout();
}

void FaultyTransport::write_all(std::span<const std::uint8_t> data) {
  if (corrupt_offset_ >= sent_ && corrupt_offset_ < sent_ + data.size()) {
    std::vector<std::uint8_t> copy(data.begin(), data.end());
    copy[corrupt_offset_ - sent_] ^= mask_;
    inner_->write_all(copy);
  } else {
    inner_->write_all(data);
  }
  sent_ += data.size();
}

void FaultyTransport::read_exact(std::span<std::uint8_t> out) {
  inner_->set_timeout(timeout_);
  inner_->read_exact(out);
  received_ += out.size();
}

}  // namespace pinfer::net
