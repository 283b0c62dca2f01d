#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pinfer/common/bytes.hpp"
#include "pinfer/common/prng.hpp"
#include "pinfer/net/transport.hpp"

namespace pinfer::net {

enum class MsgTag : std::uint8_t {
  kHello = 0x01,
  kHelloAck = 0x02,
  kAbort = 0x03,
  kControl = 0x04,
  kOtSetup = 0x10,
  kOtExtend = 0x11,
  kOtCorrection = 0x12,
  kCmp = 0x20,
  kMux = 0x21,
  kDiv = 0x22,
  kTrip = 0x23,
  kMult = 0x24,
  kLinCt = 0x30,
  kLinResult = 0x31,
  kRelu = 0x32,
  kPool = 0x33,
  kRoute = 0x40,
  kEstablish = 0x41,
  kInfer = 0x42,
  kResult = 0x43,
};

const char* tag_name(MsgTag tag);
bool is_known_tag(std::uint8_t tag);

using SessionId = std::array<std::uint8_t, 16>;
using Key32 = std::array<std::uint8_t, 32>;

std::string session_hex(const SessionId& id);

inline constexpr std::size_t kFrameHeaderSize = 1 + 16 + 4;
inline constexpr std::size_t kFrameMacSize = 16;
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

struct LabelStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
};

// Per-label byte accounting. Every frame byte written or read is charged to
// exactly one label, so totals always equal the sum over labels.
struct CommStats {
  std::vector<std::string> order;  // labels in first-use order
  std::map<std::string, LabelStats> labels;
  std::uint64_t total_sent = 0;
  std::uint64_t total_received = 0;
  std::uint64_t rounds = 0;  // outgoing flights: sends that follow a receive
  std::vector<std::pair<std::string, double>> phase_seconds;

  LabelStats& at(const std::string& label);
  void add_phase(const std::string& name, double seconds);
  double total_mb() const { return static_cast<double>(total_sent + total_received) / 1e6; }
};

struct Frame {
  MsgTag tag;
  Bytes payload;
};

// Framed, MAC-authenticated message stream bound to one session. Wire
// format per frame: tag (1) | session id (16) | payload length (4, LE) |
// payload | MAC (16). The MAC is keyed BLAKE2b over direction, sequence
// number, header and payload.
class Channel {
 public:
  Channel(std::unique_ptr<Transport> transport, SessionId sid, bool initiator);
  ~Channel();

  void send(MsgTag tag, std::span<const std::uint8_t> payload);
  Bytes recv(MsgTag expected);
  Frame recv_any();
  // Best-effort notification of the peer followed by close. Never throws.
  void abort(const std::string& reason) noexcept;
  void close() noexcept;

  const SessionId& session_id() const { return sid_; }
  // The next received frame defines the session id.
  void adopt_session_id() { adopt_sid_ = true; }
  void set_keys(const Key32& send_key, const Key32& recv_key);
  void set_label(std::string label) { label_ = std::move(label); }
  const std::string& label() const { return label_; }
  void set_timeout(std::chrono::milliseconds t) { transport_->set_timeout(t); }
  bool initiator() const { return initiator_; }

  CommStats& stats() { return stats_; }
  const CommStats& stats() const { return stats_; }
  Transport& transport() { return *transport_; }

 private:
  void mac(const Key32& key, std::uint8_t direction, std::uint64_t seq, std::span<const std::uint8_t> header,
           std::span<const std::uint8_t> payload, std::uint8_t out[kFrameMacSize]) const;

  std::unique_ptr<Transport> transport_;
  SessionId sid_;
  bool initiator_;
  Key32 send_key_{};
  Key32 recv_key_{};
  std::uint64_t send_seq_ = 0;
  std::uint64_t recv_seq_ = 0;
  bool last_was_recv_ = true;
  bool broken_ = false;
  bool adopt_sid_ = false;
  std::string label_ = "session";
  CommStats stats_;
};

// Static X25519 identity.
struct StaticKeyPair {
  Key32 public_key{};
  Key32 secret_key{};

  static StaticKeyPair generate(RandomSource& rng);
  std::string to_json() const;
  static StaticKeyPair from_json(const std::string& text);
  static StaticKeyPair load(const std::string& path);
  void save(const std::string& path) const;
};

Key32 load_public_key(const std::string& path);

enum class Purpose : std::uint8_t { kPeer = 1, kUserToModel = 2, kUserToCloud = 3 };

struct HandshakeOptions {
  StaticKeyPair identity;
  // When set, a peer presenting a different static key is rejected.
  std::optional<Key32> expected_peer;
};

struct HandshakeResult {
  std::unique_ptr<Channel> channel;
  Key32 peer_static{};
  Purpose purpose = Purpose::kPeer;
};

// Two frames: HELLO from the initiator, HELLO_ACK carrying a key
// confirmation tag from the responder. Both sides derive directional MAC
// keys from ephemeral-ephemeral and static-static X25519 secrets.
HandshakeResult handshake_initiate(std::unique_ptr<Transport> transport, const SessionId& sid, Purpose purpose,
                                   const HandshakeOptions& opts, RandomSource& rng);
HandshakeResult handshake_respond(std::unique_ptr<Transport> transport, const HandshakeOptions& opts,
                                  RandomSource& rng);

}  // namespace pinfer::net
