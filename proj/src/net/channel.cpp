#include "pinfer/net/channel.hpp"

#include <sodium.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pinfer/common/error.hpp"

namespace pinfer::net {

const char* tag_name(MsgTag tag) {
  switch (tag) {
    case MsgTag::kHello: return "HELLO";
    case MsgTag::kHelloAck: return "HELLO_ACK";
    case MsgTag::kAbort: return "ABORT";
    case MsgTag::kControl: return "CONTROL";
    case MsgTag::kOtSetup: return "OT_SETUP";
    case MsgTag::kOtExtend: return "OT_EXTEND";
    case MsgTag::kOtCorrection: return "OT_CORRECTION";
    case MsgTag::kCmp: return "CMP";
    case MsgTag::kMux: return "MUX";
    case MsgTag::kDiv: return "DIV";
    case MsgTag::kTrip: return "TRIP";
    case MsgTag::kMult: return "MULT";
    case MsgTag::kLinCt: return "LIN_CT";
    case MsgTag::kLinResult: return "LIN_RESULT";
    case MsgTag::kRelu: return "RELU";
    case MsgTag::kPool: return "POOL";
    case MsgTag::kRoute: return "ROUTE";
    case MsgTag::kEstablish: return "ESTABLISH";
    case MsgTag::kInfer: return "INFER";
    case MsgTag::kResult: return "RESULT";
  }
  return "UNKNOWN";
}

bool is_known_tag(std::uint8_t tag) {
  return std::string_view(tag_name(static_cast<MsgTag>(tag))) != "UNKNOWN";
}

std::string session_hex(const SessionId& id) { return to_hex(id); }

LabelStats& CommStats::at(const std::string& label) {
  auto it = labels.find(label);
  if (it == labels.end()) {
    order.push_back(label);
    it = labels.emplace(label, LabelStats{}).first;
  }
  return it->second;
}

void CommStats::add_phase(const std::string& name, double seconds) {
  for (auto& [n, s] : phase_seconds) {
    if (n == name) {
      s += seconds;
      return;
    }
  }
  phase_seconds.emplace_back(name, seconds);
}

Channel::Channel(std::unique_ptr<Transport> transport, SessionId sid, bool initiator)
    : transport_(std::move(transport)), sid_(sid), initiator_(initiator) {}

Channel::~Channel() { close(); }

void Channel::set_keys(const Key32& send_key, const Key32& recv_key) {
  send_key_ = send_key;
  recv_key_ = recv_key;
}

void Channel::mac(const Key32& key, std::uint8_t direction, std::uint64_t seq, std::span<const std::uint8_t> header,
                  std::span<const std::uint8_t> payload, std::uint8_t out[kFrameMacSize]) const {
  crypto_generichash_state st;
  crypto_generichash_init(&st, key.data(), key.size(), kFrameMacSize);
  std::uint8_t prefix[9];
  prefix[0] = direction;
  for (int i = 0; i < 8; ++i) prefix[1 + i] = static_cast<std::uint8_t>(seq >> (8 * i));
  crypto_generichash_update(&st, prefix, sizeof prefix);
  crypto_generichash_update(&st, header.data(), header.size());
  crypto_generichash_update(&st, payload.data(), payload.size());
  crypto_generichash_final(&st, out, kFrameMacSize);
}

void Channel::send(MsgTag tag, std::span<const std::uint8_t> payload) {
  if (broken_) fail(ErrorCode::kChannelClosed, "channel aborted");
  if (payload.size() > kMaxPayload) fail(ErrorCode::kInvalidArgument, "frame payload too large");
  std::uint8_t header[kFrameHeaderSize];
  header[0] = static_cast<std::uint8_t>(tag);
  std::copy(sid_.begin(), sid_.end(), header + 1);
  const auto len = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) header[17 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  std::uint8_t tag_bytes[kFrameMacSize];
  mac(send_key_, initiator_ ? 0 : 1, send_seq_++, header, payload, tag_bytes);

  Bytes frame;
  frame.reserve(kFrameHeaderSize + payload.size() + kFrameMacSize);
  frame.insert(frame.end(), header, header + kFrameHeaderSize);
  frame.insert(frame.end(), payload.begin(), payload.end());
  frame.insert(frame.end(), tag_bytes, tag_bytes + kFrameMacSize);
  try {
    transport_->write_all(frame);
  } catch (...) {
    broken_ = true;
    throw;
  }
  auto& ls = stats_.at(label_);
  ls.bytes_sent += frame.size();
  ++ls.frames_sent;
  stats_.total_sent += frame.size();
  if (last_was_recv_) ++stats_.rounds;
  last_was_recv_ = false;
}

Frame Channel::recv_any() {
  if (broken_) fail(ErrorCode::kChannelClosed, "channel aborted");
  std::uint8_t header[kFrameHeaderSize];
  Frame f;
  std::uint8_t got_mac[kFrameMacSize];
  try {
    transport_->read_exact(header);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{header[17 + i]} << (8 * i);
    if (!is_known_tag(header[0])) fail(ErrorCode::kProtocolDesync, "unknown frame tag " + std::to_string(header[0]));
    if (len > kMaxPayload) fail(ErrorCode::kProtocolDesync, "frame length out of range");
    f.tag = static_cast<MsgTag>(header[0]);
    f.payload.resize(len);
    transport_->read_exact(f.payload);
    transport_->read_exact(std::span<std::uint8_t>(got_mac, kFrameMacSize));
  } catch (const Error& e) {
    broken_ = true;
    if (e.code() == ErrorCode::kProtocolDesync) abort(e.what());
    throw;
  }
  const std::size_t frame_bytes = kFrameHeaderSize + f.payload.size() + kFrameMacSize;
  auto& ls = stats_.at(label_);
  ls.bytes_received += frame_bytes;
  ++ls.frames_received;
  stats_.total_received += frame_bytes;
  last_was_recv_ = true;

  std::uint8_t want[kFrameMacSize];
  mac(recv_key_, initiator_ ? 1 : 0, recv_seq_++, std::span<const std::uint8_t>(header, kFrameHeaderSize), f.payload,
      want);
  if (sodium_memcmp(want, got_mac, kFrameMacSize) != 0) {
    abort("frame authentication failed");
    fail(ErrorCode::kAuthFailure, "frame authentication failed");
  }
  if (adopt_sid_) {
    std::copy(header + 1, header + 17, sid_.begin());
    adopt_sid_ = false;
  }
  if (!std::equal(sid_.begin(), sid_.end(), header + 1)) {
    abort("session id mismatch");
    fail(ErrorCode::kProtocolDesync, "frame for a different session");
  }
  if (f.tag == MsgTag::kAbort) {
    broken_ = true;
    transport_->close();
    std::string reason(f.payload.begin(), f.payload.end());
    fail(ErrorCode::kPeerAbort, "peer aborted: " + reason);
  }
  return f;
}

Bytes Channel::recv(MsgTag expected) {
  Frame f = recv_any();
  if (f.tag != expected) {
    const std::string msg = std::string("expected ") + tag_name(expected) + " frame, got " + tag_name(f.tag);
    abort(msg);
    fail(ErrorCode::kProtocolDesync, msg);
  }
  return std::move(f.payload);
}

void Channel::abort(const std::string& reason) noexcept {
  try {
    if (!broken_) {
      const std::string text = reason.substr(0, 512);
      send(MsgTag::kAbort, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
  } catch (...) {
  }
  broken_ = true;
  close();
}

void Channel::close() noexcept {
  try {
    if (transport_) transport_->close();
  } catch (...) {
  }
}

StaticKeyPair StaticKeyPair::generate(RandomSource& rng) {
  StaticKeyPair kp;
  rng.fill(kp.secret_key);
  crypto_scalarmult_base(kp.public_key.data(), kp.secret_key.data());
  return kp;
}

std::string StaticKeyPair::to_json() const {
  nlohmann::json j;
  j["kind"] = "x25519";
  j["public"] = to_hex(public_key);
  j["secret"] = to_hex(secret_key);
  return j.dump(2) + "\n";
}

namespace {
Key32 key_from_hex(const std::string& hex) {
  Bytes b = from_hex(hex);
  if (b.size() != 32) fail(ErrorCode::kDecode, "key must be 32 bytes");
  Key32 k;
  std::copy(b.begin(), b.end(), k.begin());
  return k;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

StaticKeyPair StaticKeyPair::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    StaticKeyPair kp;
    kp.public_key = key_from_hex(j.at("public").get<std::string>());
    kp.secret_key = key_from_hex(j.at("secret").get<std::string>());
    Key32 derived;
    crypto_scalarmult_base(derived.data(), kp.secret_key.data());
    if (derived != kp.public_key) fail(ErrorCode::kDecode, "public key does not match secret key");
    return kp;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("malformed key file: ") + e.what());
  }
}

StaticKeyPair StaticKeyPair::load(const std::string& path) { return from_json(read_text(path)); }

void StaticKeyPair::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << to_json();
}

Key32 load_public_key(const std::string& path) {
  const std::string text = read_text(path);
  try {
    auto j = nlohmann::json::parse(text);
    return key_from_hex(j.at("public").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    std::string trimmed = text;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.pop_back();
    return key_from_hex(trimmed);
  }
}

namespace {

constexpr std::uint8_t kHandshakeVersion = 1;

Key32 dh(const Key32& sk, const Key32& pk) {
  Key32 out;
  if (crypto_scalarmult(out.data(), sk.data(), pk.data()) != 0) {
    fail(ErrorCode::kAuthFailure, "degenerate peer key");
  }
  return out;
}

Key32 derive(const Key32& master, std::string_view label) {
  Key32 out;
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const std::uint8_t*>(label.data()), label.size(),
                     master.data(), master.size());
  return out;
}

Key32 master_key(const Key32& ee, const Key32& ss, std::span<const std::uint8_t> transcript) {
  crypto_generichash_state st;
  Key32 out;
  crypto_generichash_init(&st, nullptr, 0, out.size());
  crypto_generichash_update(&st, ee.data(), ee.size());
  crypto_generichash_update(&st, ss.data(), ss.size());
  crypto_generichash_update(&st, transcript.data(), transcript.size());
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

struct HelloBody {
  std::uint8_t version;
  Purpose purpose;
  Key32 static_pk;
  Key32 eph_pk;
};

Bytes encode_hello(const HelloBody& h) {
  ByteWriter w;
  w.u8(h.version);
  w.u8(static_cast<std::uint8_t>(h.purpose));
  w.raw(h.static_pk);
  w.raw(h.eph_pk);
  return std::move(w).take();
}

HelloBody decode_hello(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  HelloBody h;
  h.version = r.u8();
  if (h.version != kHandshakeVersion) fail(ErrorCode::kVersion, "unsupported handshake version");
  const std::uint8_t p = r.u8();
  if (p < 1 || p > 3) fail(ErrorCode::kDecode, "unknown channel purpose");
  h.purpose = static_cast<Purpose>(p);
  auto s = r.raw(32);
  std::copy(s.begin(), s.end(), h.static_pk.begin());
  auto e = r.raw(32);
  std::copy(e.begin(), e.end(), h.eph_pk.begin());
  return h;
}

}  // namespace

HandshakeResult handshake_initiate(std::unique_ptr<Transport> transport, const SessionId& sid, Purpose purpose,
                                   const HandshakeOptions& opts, RandomSource& rng) {
  StaticKeyPair eph = StaticKeyPair::generate(rng);
  auto ch = std::make_unique<Channel>(std::move(transport), sid, true);
  ch->set_label("handshake");
  const Bytes hello = encode_hello({kHandshakeVersion, purpose, opts.identity.public_key, eph.public_key});
  ch->send(MsgTag::kHello, hello);

  Bytes ack = ch->recv(MsgTag::kHelloAck);
  ByteReader r(ack);
  HelloBody peer = decode_hello(r.raw(2 + 64));
  auto confirm = r.raw(16);
  r.expect_end();
  if (opts.expected_peer && *opts.expected_peer != peer.static_pk) {
    ch->abort("unexpected peer key");
    fail(ErrorCode::kAuthFailure, "peer presented an unexpected static key");
  }
  Bytes transcript = hello;
  transcript.insert(transcript.end(), ack.begin(), ack.begin() + 66);
  const Key32 master =
      master_key(dh(eph.secret_key, peer.eph_pk), dh(opts.identity.secret_key, peer.static_pk), transcript);
  const Key32 want = derive(master, "confirm");
  if (sodium_memcmp(want.data(), confirm.data(), 16) != 0) {
    ch->abort("key confirmation failed");
    fail(ErrorCode::kAuthFailure, "handshake key confirmation failed");
  }
  ch->set_keys(derive(master, "initiator"), derive(master, "responder"));
  ch->set_label("session");
  return {std::move(ch), peer.static_pk, purpose};
}

HandshakeResult handshake_respond(std::unique_ptr<Transport> transport, const HandshakeOptions& opts,
                                  RandomSource& rng) {
  StaticKeyPair eph = StaticKeyPair::generate(rng);
  auto ch = std::make_unique<Channel>(std::move(transport), SessionId{}, false);
  ch->set_label("handshake");
  // The session id is adopted from the HELLO header.
  ch->adopt_session_id();
  const Bytes hello = ch->recv(MsgTag::kHello);
  HelloBody peer = decode_hello(hello);
  if (opts.expected_peer && *opts.expected_peer != peer.static_pk) {
    ch->abort("unexpected peer key");
    fail(ErrorCode::kAuthFailure, "peer presented an unexpected static key");
  }
  const Bytes body = encode_hello({kHandshakeVersion, peer.purpose, opts.identity.public_key, eph.public_key});
  Bytes transcript = hello;
  transcript.insert(transcript.end(), body.begin(), body.end());
  const Key32 master =
      master_key(dh(eph.secret_key, peer.eph_pk), dh(opts.identity.secret_key, peer.static_pk), transcript);
  const Key32 confirm = derive(master, "confirm");
  Bytes ack = body;
  ack.insert(ack.end(), confirm.begin(), confirm.begin() + 16);
  ch->send(MsgTag::kHelloAck, ack);
  ch->set_keys(derive(master, "responder"), derive(master, "initiator"));
  ch->set_label("session");
  return {std::move(ch), peer.static_pk, peer.purpose};
}

}  // namespace pinfer::net
