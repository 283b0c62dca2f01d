#include <algorithm>

#include <sodium.h>
#include <spdlog/spdlog.h>

#include "pinfer/orchestrator/orchestrator.hpp"
#include "pinfer/sharing.hpp"

namespace pinfer::orch {

using nlohmann::json;

namespace {

void hash_into(std::span<std::uint8_t> out, std::initializer_list<std::span<const std::uint8_t>> parts,
               std::span<const std::uint8_t> key = {}) {
  crypto_generichash_state st;
  crypto_generichash_init(&st, key.empty() ? nullptr : key.data(), key.size(), out.size());
  for (auto p : parts) crypto_generichash_update(&st, p.data(), p.size());
  crypto_generichash_final(&st, out.data(), out.size());
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Key32 wrap_key(const Key32& shared, const Key32& epk, const Key32& pk) {
  Key32 out{};
  hash_into(out, {as_bytes("pinfer/kem"), shared, epk, pk});
  return out;
}

const std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> kZeroNonce{};

}  // namespace

Bytes encapsulate(const Key32& k, const SessionId& sid, const Key32& cloud_pk, RandomSource& rng) {
  const auto eph = net::StaticKeyPair::generate(rng);
  Key32 shared{};
  if (crypto_scalarmult(shared.data(), eph.secret_key.data(), cloud_pk.data()) != 0) {
    fail(ErrorCode::kInvalidArgument, "degenerate cloud public key");
  }
  const Key32 wk = wrap_key(shared, eph.public_key, cloud_pk);
  Bytes out(kEncapsulationSize);
  std::copy(eph.public_key.begin(), eph.public_key.end(), out.begin());
  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + 32, &clen, k.data(), k.size(), sid.data(), sid.size(),
                                            nullptr, kZeroNonce.data(), wk.data());
  sodium_memzero(shared.data(), shared.size());
  return out;
}

Key32 decapsulate(std::span<const std::uint8_t> enc, const SessionId& sid, const net::StaticKeyPair& cloud) {
  require(enc.size() == kEncapsulationSize, ErrorCode::kDecapsulation, "encapsulation has the wrong size");
  Key32 epk{};
  std::copy(enc.begin(), enc.begin() + 32, epk.begin());
  Key32 shared{};
  if (crypto_scalarmult(shared.data(), cloud.secret_key.data(), epk.data()) != 0) {
    fail(ErrorCode::kDecapsulation, "degenerate ephemeral key");
  }
  const Key32 wk = wrap_key(shared, epk, cloud.public_key);
  Key32 k{};
  unsigned long long klen = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(k.data(), &klen, nullptr, enc.data() + 32, enc.size() - 32,
                                                sid.data(), sid.size(), kZeroNonce.data(), wk.data()) != 0) {
    fail(ErrorCode::kDecapsulation, "session key does not authenticate");
  }
  return k;
}

Key32 confirmation_tag(const Key32& k, const SessionId& sid, std::span<const std::uint8_t> enc) {
  Key32 out{};
  hash_into(out, {as_bytes("pinfer/confirm"), sid, enc}, k);
  return out;
}

bool ReplayCache::insert(std::span<const std::uint8_t> enc) {
  Key32 h{};
  hash_into(h, {enc});
  std::lock_guard lock(mu_);
  return seen_.insert(h).second;
}

AeadStream::AeadStream(const Key32& key, Direction outgoing) : key_(key), out_(outgoing) {}

namespace {

std::array<std::uint8_t, 12> nonce(Direction d, std::uint64_t ctr) {
  std::array<std::uint8_t, 12> n{};
  n[0] = static_cast<std::uint8_t>(d);
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(ctr >> (8 * i));
  return n;
}

}  // namespace

Bytes AeadStream::seal(std::span<const std::uint8_t> plain, std::span<const std::uint8_t> aad) {
  const auto n = nonce(out_, send_ctr_++);
  Bytes out(plain.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &clen, plain.data(), plain.size(), aad.data(), aad.size(),
                                            nullptr, n.data(), key_.data());
  return out;
}

Bytes AeadStream::open(std::span<const std::uint8_t> ct, std::span<const std::uint8_t> aad) {
  require(ct.size() >= crypto_aead_chacha20poly1305_ietf_ABYTES, ErrorCode::kAead, "ciphertext too short");
  const Direction in = out_ == Direction::kUserToCloud ? Direction::kCloudToUser : Direction::kUserToCloud;
  const auto n = nonce(in, recv_ctr_);
  Bytes out(ct.size() - crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long plen = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &plen, nullptr, ct.data(), ct.size(), aad.data(),
                                                aad.size(), n.data(), key_.data()) != 0) {
    fail(ErrorCode::kAead, "ciphertext failed authentication");
  }
  ++recv_ctr_;
  return out;
}

void send_request(net::Channel& ch, net::MsgTag tag, const json& header, std::span<const std::uint8_t> body) {
  Bytes payload;
  const std::string line = header.dump();
  payload.insert(payload.end(), line.begin(), line.end());
  payload.push_back('\n');
  payload.insert(payload.end(), body.begin(), body.end());
  ch.send(tag, payload);
}

Request recv_request(net::Channel& ch, net::MsgTag tag) {
  const Bytes payload = ch.recv(tag);
  const auto nl = std::find(payload.begin(), payload.end(), std::uint8_t{'\n'});
  require(nl != payload.end(), ErrorCode::kDecode, "request without header line");
  Request r;
  try {
    r.header = json::parse(payload.begin(), nl);
  } catch (const json::exception& e) {
    fail(ErrorCode::kDecode, std::string("malformed request header: ") + e.what());
  }
  r.body.assign(nl + 1, payload.end());
  return r;
}

namespace {

SessionId parse_token(const json& header) {
  SessionId t{};
  Bytes b;
  try {
    b = from_hex(header.at("token").get<std::string>());
  } catch (const json::exception&) {
    fail(ErrorCode::kDecode, "request lacks a session token");
  }
  require(b.size() == t.size(), ErrorCode::kDecode, "session token must be 16 bytes");
  std::copy(b.begin(), b.end(), t.begin());
  return t;
}

Bytes with_token(std::string_view label, const SessionId& token) {
  Bytes aad(label.begin(), label.end());
  aad.insert(aad.end(), token.begin(), token.end());
  return aad;
}

json report_json(const runtime::SessionReport& r) {
  return {{"model", r.model},
          {"batch", r.batch},
          {"seconds", r.seconds},
          {"bytes_sent", r.stats.total_sent},
          {"bytes_received", r.stats.total_received},
          {"rounds", r.stats.rounds}};
}

void check_input_shape(const Shape& want, const Shape& got) {
  const bool single = got == want;
  const bool batch = got.size() == want.size() + 1 && std::equal(want.begin(), want.end(), got.begin() + 1);
  if (!single && !batch) {
    fail(ErrorCode::kShapeMismatch, "input shape " + shape_string(got) + " does not match model input " +
                                        shape_string(want));
  }
}

}  // namespace

// ---- daemons ----

Daemon::~Daemon() {
  for (auto& w : workers_) {
    if (w.thread.joinable()) w.thread.join();
  }
}

void Daemon::serve(net::TcpListener& listener, const std::atomic<bool>& stop) {
  while (!stop.load()) {
    auto t = listener.accept(std::chrono::milliseconds(100));
    std::erase_if(workers_, [](Worker& w) {
      if (!w.done->load()) return false;
      w.thread.join();
      return true;
    });
    if (!t) continue;
    auto done = std::make_shared<std::atomic<bool>>(false);
    workers_.push_back({std::thread([this, done, tr = std::move(t)]() mutable {
                          run_connection(std::move(tr));
                          done->store(true);
                        }),
                        done});
  }
  for (auto& w : workers_) w.thread.join();
  workers_.clear();
}

void Daemon::run_connection(std::unique_ptr<net::Transport> t) {
  try {
    t->set_timeout(cfg_.timeout);
    Prng rng = Prng::from_os();
    handle(net::handshake_respond(std::move(t), {cfg_.identity, std::nullopt}, rng));
  } catch (const Error& e) {
    ++failures_;
    spdlog::warn("session failed: {}", e.what());
  }
}

Prng Daemon::session_rng(const SessionId& token, std::string_view role) const {
  if (!cfg_.seed) return Prng::from_os();
  return Prng(Prng::derive_seed(Prng::derive_seed(*cfg_.seed, role), to_hex(token)));
}

void Daemon::record(runtime::SessionReport r) {
  std::lock_guard lock(mu_);
  reports_.push_back(std::move(r));
}

std::vector<runtime::SessionReport> Daemon::reports() const {
  std::lock_guard lock(mu_);
  return reports_;
}

ModelServer::ModelServer(model::ModelSpec m, ServerConfig cfg, net::Endpoint cloud, Key32 cloud_key)
    : Daemon(std::move(cfg)), model_(std::move(m)), cloud_(std::move(cloud)), cloud_key_(cloud_key) {
  model::layer_shapes(model_);
}

void ModelServer::handle(net::HandshakeResult hs) {
  auto& ch = *hs.channel;
  try {
    require(hs.purpose == net::Purpose::kUserToModel, ErrorCode::kProtocolDesync, "model server expects users");
    ch.set_label("dispatch");
    const auto req = recv_request(ch, net::MsgTag::kInfer);
    const SessionId token = parse_token(req.header);
    require(req.header.value("cloud_key", "") == to_hex(cloud_key_), ErrorCode::kConfigMismatch,
            "user routed to a cloud server this model server does not trust");
    const ArithShare x0 = deserialize_share(req.body);
    require(x0.party() == PartyId::kOwner, ErrorCode::kProtocolDesync, "model server expects share 0");
    check_input_shape(model_.input_shape, x0.shape());

    Prng rng = session_rng(token, "model");
    auto t = net::tcp_connect(cloud_, cfg_.timeout);
    t->set_timeout(cfg_.timeout);
    auto peer = net::handshake_initiate(std::move(t), token, net::Purpose::kPeer, {cfg_.identity, cloud_key_}, rng);
    auto opts = cfg_.session;
    opts.dealer_seed = Prng::derive_seed(token, "dealer");
    const auto res = runtime::run_owner_session(*peer.channel, model_, x0, opts, rng);
    peer.channel->close();
    spdlog::info("model-server session={} model={} batch={} seconds={:.3f} mb={:.3f}", to_hex(token), model_.name,
                 res.report.batch, res.report.seconds, res.report.stats.total_mb());
    ch.set_label("result");
    send_request(ch, net::MsgTag::kResult, {{"type", "result"}, {"report", report_json(res.report)}},
                 serialize_share(res.share));
    record(res.report);
  } catch (const Error& e) {
    ch.abort(e.what());
    throw;
  }
}

CloudServer::CloudServer(ServerConfig cfg, std::optional<Key32> model_key)
    : Daemon(std::move(cfg)), model_key_(model_key) {}

void CloudServer::handle(net::HandshakeResult hs) {
  if (hs.purpose == net::Purpose::kPeer) {
    if (model_key_ && hs.peer_static != *model_key_) {
      hs.channel->abort("unknown model server");
      fail(ErrorCode::kAuthFailure, "peer session from an unknown model server");
    }
    const SessionId token = hs.channel->session_id();
    std::lock_guard lock(mu_);
    peers_[token] = std::move(hs.channel);
    cv_.notify_all();
    return;
  }
  if (hs.purpose != net::Purpose::kUserToCloud) {
    hs.channel->abort("cloud server expects users or model servers");
    fail(ErrorCode::kProtocolDesync, "unexpected channel purpose");
  }
  serve_user(*hs.channel);
}

std::unique_ptr<net::Channel> CloudServer::wait_peer(const SessionId& token) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, cfg_.timeout, [&] { return peers_.contains(token); })) {
    fail(ErrorCode::kTimeout, "model server never joined session " + to_hex(token));
  }
  auto ch = std::move(peers_[token]);
  peers_.erase(token);
  return ch;
}

void CloudServer::serve_user(net::Channel& ch) {
  std::optional<SessionId> token;
  try {
    ch.set_label("establish");
    const auto est = recv_request(ch, net::MsgTag::kEstablish);
    const Key32 k = decapsulate(est.body, ch.session_id(), cfg_.identity);
    require(replay_.insert(est.body), ErrorCode::kReplay, "session key encapsulation replayed");
    const Key32 tag = confirmation_tag(k, ch.session_id(), est.body);
    send_request(ch, net::MsgTag::kEstablish, {{"type", "confirm"}}, tag);

    ch.set_label("dispatch");
    const auto req = recv_request(ch, net::MsgTag::kInfer);
    token = parse_token(req.header);
    AeadStream aead(k, Direction::kCloudToUser);
    const ArithShare x1 = deserialize_share(aead.open(req.body, with_token("x1", *token)));
    require(x1.party() == PartyId::kCloud, ErrorCode::kProtocolDesync, "cloud server expects share 1");
    send_request(ch, net::MsgTag::kInfer, {{"type", "accepted"}}, {});

    auto peer = wait_peer(*token);
    Prng rng = session_rng(*token, "cloud");
    auto opts = cfg_.session;
    opts.dealer_seed = Prng::derive_seed(*token, "dealer");
    const auto res = runtime::run_cloud_session(*peer, x1, opts, rng);
    spdlog::info("cloud-server session={} batch={} seconds={:.3f} mb={:.3f}", to_hex(*token), res.report.batch,
                 res.report.seconds, res.report.stats.total_mb());
    ch.set_label("result");
    send_request(ch, net::MsgTag::kResult, {{"type", "result"}},
                 aead.seal(serialize_share(res.share), with_token("res1", *token)));
    record(res.report);
  } catch (const Error& e) {
    ch.abort(e.what());
    if (token) {
      // A model server that already joined would otherwise wait for its timeout.
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(500), [&] { return peers_.contains(*token); });
      if (auto it = peers_.find(*token); it != peers_.end()) {
        it->second->abort(e.what());
        peers_.erase(it);
      }
    }
    throw;
  }
}

// ---- user ----

namespace {

std::unique_ptr<net::Channel> open_channel(const ServerEntry& s, net::Purpose purpose,
                                           const net::StaticKeyPair& identity, RandomSource& rng,
                                           const UserOptions& opts) {
  auto t = net::tcp_connect(s.endpoint, opts.timeout);
  t->set_timeout(opts.timeout);
  if (opts.wrap) t = opts.wrap(std::move(t), s);
  SessionId sid{};
  rng.fill(sid);
  return net::handshake_initiate(std::move(t), sid, purpose, {identity, s.public_key}, rng).channel;
}

}  // namespace

Key32 establish_session(net::Channel& cloud, const Key32& cloud_pk, RandomSource& rng, Tamper tamper) {
  cloud.set_label("establish");
  Key32 k{};
  rng.fill(k);
  Bytes enc = encapsulate(k, cloud.session_id(), cloud_pk, rng);
  if (tamper == Tamper::kEncapsulation) enc[40] ^= 0x01;
  send_request(cloud, net::MsgTag::kEstablish, {{"type", "establish"}}, enc);
  Request confirm;
  try {
    confirm = recv_request(cloud, net::MsgTag::kEstablish);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kPeerAbort) throw;
    fail(ErrorCode::kConfirmation, std::string("cloud did not confirm the session key: ") + e.what());
  }
  const Key32 want = confirmation_tag(k, cloud.session_id(), enc);
  if (confirm.body.size() != want.size() || sodium_memcmp(confirm.body.data(), want.data(), want.size()) != 0) {
    cloud.abort("key confirmation mismatch");
    fail(ErrorCode::kConfirmation, "cloud confirmation tag mismatch");
  }
  return k;
}

InferenceOutcome dispatch_and_reconstruct(const FixedTensor& x, const RoutePlan& plan, RandomSource& rng,
                                          const UserOptions& opts) {
  if (!plan.model.input_shape.empty()) check_input_shape(plan.model.input_shape, x.shape());
  const auto t0 = std::chrono::steady_clock::now();
  const auto shares = share(x, rng);
  SessionId token{};
  rng.fill(token);
  const auto identity = net::StaticKeyPair::generate(rng);

  // Phase 1: the one-time key goes to the cloud sealed under its public key.
  auto cloud = open_channel(plan.cloud, net::Purpose::kUserToCloud, identity, rng, opts);
  const Key32 k = establish_session(*cloud, plan.cloud.public_key, rng, opts.tamper);

  // Phase 3: x_1 sealed under k to the cloud, x_0 in the clear to the model server.
  AeadStream aead(k, Direction::kUserToCloud);
  cloud->set_label("dispatch");
  Bytes sealed = aead.seal(serialize_share(shares.share1), with_token("x1", token));
  if (opts.tamper == Tamper::kX1Ciphertext) sealed[sealed.size() / 2] ^= 0x01;
  send_request(*cloud, net::MsgTag::kInfer, {{"type", "infer"}, {"token", to_hex(token)}}, sealed);
  // The model server is only contacted once the cloud holds its share.
  recv_request(*cloud, net::MsgTag::kInfer);

  auto model = open_channel(plan.model, net::Purpose::kUserToModel, identity, rng, opts);
  model->set_label("dispatch");
  send_request(*model, net::MsgTag::kInfer,
               {{"type", "infer"}, {"token", to_hex(token)}, {"cloud_key", to_hex(plan.cloud.public_key)}},
               serialize_share(shares.share0));

  // Phase 4: res_0 in the clear, res_1 sealed under k.
  model->set_label("result");
  cloud->set_label("result");
  const auto r0 = recv_request(*model, net::MsgTag::kResult);
  auto r1 = recv_request(*cloud, net::MsgTag::kResult);
  if (opts.tamper == Tamper::kRes1Ciphertext && !r1.body.empty()) r1.body[r1.body.size() / 2] ^= 0x01;
  Bytes res1_bytes;
  try {
    res1_bytes = aead.open(r1.body, with_token("res1", token));
  } catch (const Error&) {
    cloud->abort("result share failed authentication");
    model->close();
    throw;
  }
  const ArithShare res0 = deserialize_share(r0.body);
  const ArithShare res1 = deserialize_share(res1_bytes);
  require(res0.shape() == res1.shape(), ErrorCode::kShapeMismatch, "result shares disagree in shape");

  InferenceOutcome out;
  out.result = reconstruct(res0, res1);
  out.model_report = r0.header.value("report", json::object());
  out.model_link = model->stats();
  out.cloud_link = cloud->stats();
  model->close();
  cloud->close();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace pinfer::orch
