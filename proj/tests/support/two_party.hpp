#pragma once

#include <exception>
#include <functional>
#include <thread>

#include "pinfer/net/channel.hpp"

namespace testing_support {

using pinfer::net::Channel;

struct ChannelPair {
  std::unique_ptr<Channel> a, b;
};

inline ChannelPair connected_pair(std::uint64_t seed = 1) {
  using namespace pinfer;
  auto [ta, tb] = net::memory_pipe();
  Prng ra(Prng::derive_seed(seed, "pair-a")), rb(Prng::derive_seed(seed, "pair-b"));
  net::HandshakeOptions oa{net::StaticKeyPair::generate(ra), std::nullopt};
  net::HandshakeOptions ob{net::StaticKeyPair::generate(rb), std::nullopt};
  net::SessionId sid{};
  sid[0] = static_cast<std::uint8_t>(seed);
  net::HandshakeResult res_b;
  std::exception_ptr err;
  std::thread t([&] {
    try {
      res_b = net::handshake_respond(std::move(tb), ob, rb);
    } catch (...) {
      err = std::current_exception();
    }
  });
  auto res_a = net::handshake_initiate(std::move(ta), sid, net::Purpose::kPeer, oa, ra);
  t.join();
  if (err) std::rethrow_exception(err);
  return {std::move(res_a.channel), std::move(res_b.channel)};
}

// Runs the two party functions concurrently; rethrows the first failure.
inline void run_pair(const std::function<void()>& fa, const std::function<void()>& fb) {
  std::exception_ptr ea, eb;
  std::thread t([&] {
    try {
      fb();
    } catch (...) {
      eb = std::current_exception();
    }
  });
  try {
    fa();
  } catch (...) {
    ea = std::current_exception();
  }
  t.join();
  if (ea) std::rethrow_exception(ea);
  if (eb) std::rethrow_exception(eb);
}

}  // namespace testing_support
