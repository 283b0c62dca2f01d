#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "pinfer/common/error.hpp"
#include "pinfer/net/channel.hpp"
#include "support/two_party.hpp"

using namespace pinfer;
using namespace pinfer::net;
using testing_support::connected_pair;
using testing_support::run_pair;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

Bytes bytes_of(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST(Frame, RoundTripAndAccounting) {
  auto p = connected_pair();
  p.a->set_label("layer-1");
  p.a->send(MsgTag::kLinCt, bytes_of("hello"));
  p.b->set_label("layer-1");
  EXPECT_EQ(p.b->recv(MsgTag::kLinCt), bytes_of("hello"));
  p.b->send(MsgTag::kLinResult, Bytes(1000, 7));
  EXPECT_EQ(p.a->recv(MsgTag::kLinResult), Bytes(1000, 7));

  for (auto* ch : {p.a.get(), p.b.get()}) {
    const auto& st = ch->stats();
    EXPECT_EQ(st.total_sent, ch->transport().bytes_sent());
    EXPECT_EQ(st.total_received, ch->transport().bytes_received());
    std::uint64_t sum = 0;
    for (auto& [k, v] : st.labels) sum += v.bytes_sent + v.bytes_received;
    EXPECT_EQ(sum, st.total_sent + st.total_received);
    EXPECT_EQ(st.labels.at("handshake").frames_sent + st.labels.at("handshake").frames_received, 2u);
  }
  EXPECT_EQ(p.a->stats().labels.at("layer-1").bytes_sent, kFrameHeaderSize + 5 + kFrameMacSize);
}

TEST(Frame, HeaderLayoutIsBitExact) {
  auto [ta, tb] = memory_pipe();
  SessionId sid{};
  for (int i = 0; i < 16; ++i) sid[i] = static_cast<std::uint8_t>(i + 1);
  Channel a(std::move(ta), sid, true);
  a.send(MsgTag::kCmp, bytes_of("xyz"));
  std::uint8_t raw[kFrameHeaderSize + 3 + kFrameMacSize];
  tb->read_exact(raw);
  EXPECT_EQ(raw[0], 0x20);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(raw[1 + i], i + 1);
  EXPECT_EQ(raw[17], 3);
  EXPECT_EQ(raw[18] | raw[19] | raw[20], 0);
  EXPECT_EQ(raw[21], 'x');
}

TEST(Frame, TagMismatchAbortsBothSides) {
  auto p = connected_pair();
  p.a->send(MsgTag::kCmp, bytes_of("a"));
  EXPECT_EQ(code_of([&] { p.b->recv(MsgTag::kMux); }), ErrorCode::kProtocolDesync);
  EXPECT_EQ(code_of([&] { p.a->recv(MsgTag::kMux); }), ErrorCode::kPeerAbort);
}

TEST(Frame, CorruptionDetectedAtEveryOffset) {
  // Flip one byte at each position of a data frame; every case must raise.
  const std::size_t frame_len = kFrameHeaderSize + 8 + kFrameMacSize;
  for (std::size_t off = 0; off < frame_len; ++off) {
    auto [ta, tb] = memory_pipe();
    SessionId sid{};
    Channel b(std::move(tb), sid, false);
    auto faulty = std::make_unique<FaultyTransport>(std::move(ta), off, 0x10);
    faulty->set_timeout(std::chrono::milliseconds(200));
    b.set_timeout(std::chrono::milliseconds(200));
    Channel a(std::move(faulty), sid, true);
    a.send(MsgTag::kDiv, Bytes(8, 1));
    a.close();
    EXPECT_THROW(b.recv(MsgTag::kDiv), Error) << "offset " << off;
  }
}

TEST(Handshake, WrongPeerKeyRejected) {
  auto [ta, tb] = memory_pipe();
  Prng ra(Prng::derive_seed(3, "a")), rb(Prng::derive_seed(3, "b"));
  HandshakeOptions oa{StaticKeyPair::generate(ra), StaticKeyPair::generate(ra).public_key};
  HandshakeOptions ob{StaticKeyPair::generate(rb), std::nullopt};
  ErrorCode ca = ErrorCode::kInternal;
  run_pair([&] { ca = code_of([&] { handshake_initiate(std::move(ta), SessionId{}, Purpose::kPeer, oa, ra); }); },
           [&] { code_of([&] { handshake_respond(std::move(tb), ob, rb); }); });
  EXPECT_EQ(ca, ErrorCode::kAuthFailure);
}

TEST(Handshake, ImpersonationWithoutSecretFails) {
  // The responder claims the expected public key but holds another secret.
  auto [ta, tb] = memory_pipe();
  Prng ra(Prng::derive_seed(4, "a")), rb(Prng::derive_seed(4, "b"));
  const StaticKeyPair real = StaticKeyPair::generate(rb);
  StaticKeyPair fake = StaticKeyPair::generate(rb);
  fake.public_key = real.public_key;
  HandshakeOptions oa{StaticKeyPair::generate(ra), real.public_key};
  HandshakeOptions ob{fake, std::nullopt};
  ErrorCode ca = ErrorCode::kInternal;
  run_pair([&] { ca = code_of([&] { handshake_initiate(std::move(ta), SessionId{}, Purpose::kPeer, oa, ra); }); },
           [&] { code_of([&] { handshake_respond(std::move(tb), ob, rb); }); });
  EXPECT_EQ(ca, ErrorCode::kAuthFailure);
}

TEST(Handshake, KeyFileRoundTrip) {
  Prng r(Prng::derive_seed(5, "k"));
  auto kp = StaticKeyPair::generate(r);
  auto back = StaticKeyPair::from_json(kp.to_json());
  EXPECT_EQ(back.public_key, kp.public_key);
  EXPECT_EQ(back.secret_key, kp.secret_key);
  auto bad = kp;
  bad.public_key[0] ^= 1;
  EXPECT_THROW(StaticKeyPair::from_json(bad.to_json()), Error);
}

TEST(Tcp, LoopbackHandshakeAndCounters) {
  TcpListener listener(Endpoint::parse("127.0.0.1:0"));
  const auto port = listener.port();
  Prng ra(Prng::derive_seed(6, "a")), rb(Prng::derive_seed(6, "b"));
  HandshakeOptions oa{StaticKeyPair::generate(ra), std::nullopt};
  HandshakeOptions ob{StaticKeyPair::generate(rb), std::nullopt};
  oa.expected_peer = ob.identity.public_key;
  std::unique_ptr<Channel> server;
  run_pair(
      [&] {
        auto r = handshake_initiate(tcp_connect({"127.0.0.1", port}, std::chrono::milliseconds(2000)), SessionId{},
                                    Purpose::kPeer, oa, ra);
        r.channel->send(MsgTag::kControl, Bytes(100000, 3));
        EXPECT_EQ(r.channel->recv(MsgTag::kControl).size(), 10u);
        EXPECT_EQ(r.channel->stats().total_sent, r.channel->transport().bytes_sent());
        EXPECT_EQ(r.channel->stats().total_received, r.channel->transport().bytes_received());
      },
      [&] {
        auto t = listener.accept(std::chrono::milliseconds(2000));
        ASSERT_TRUE(t);
        auto r = handshake_respond(std::move(t), ob, rb);
        EXPECT_EQ(r.channel->recv(MsgTag::kControl).size(), 100000u);
        r.channel->send(MsgTag::kControl, Bytes(10, 1));
        EXPECT_EQ(r.channel->stats().total_sent, r.channel->transport().bytes_sent());
        EXPECT_EQ(r.channel->stats().labels.at("handshake").frames_sent, 1u);
        EXPECT_EQ(r.channel->stats().labels.at("handshake").frames_received, 1u);
        EXPECT_EQ(r.peer_static, oa.identity.public_key);
      });
}

TEST(Tcp, DeadPortTimesOutWithinBound) {
  std::uint16_t port;
  {
    TcpListener l(Endpoint::parse("127.0.0.1:0"));
    port = l.port();
  }
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { tcp_connect({"127.0.0.1", port}, std::chrono::milliseconds(300)); }), ErrorCode::kTimeout);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_LT(elapsed, std::chrono::milliseconds(1500));
}

TEST(Tcp, ReadTimeout) {
  auto [ta, tb] = memory_pipe();
  ta->set_timeout(std::chrono::milliseconds(50));
  std::uint8_t b[1];
  EXPECT_EQ(code_of([&] { ta->read_exact(b); }), ErrorCode::kTimeout);
}

TEST(Endpoints, Parse) {
  auto ep = Endpoint::parse("localhost:8080");
  EXPECT_EQ(ep.host, "localhost");
  EXPECT_EQ(ep.port, 8080);
  EXPECT_THROW(Endpoint::parse("nohost"), Error);
  EXPECT_THROW(Endpoint::parse("h:99999"), Error);
}
