#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinfer/model/model.hpp"
#include "pinfer/net/channel.hpp"
#include "pinfer/net/transport.hpp"
#include "pinfer/runtime/runtime.hpp"

namespace pinfer::orch {

using net::Key32;
using net::SessionId;

// ---- registry -------------------------------------------------------------

inline constexpr const char* kCloudCapability = "mpc-cloud";

struct ServerEntry {
  std::string id;
  net::Endpoint endpoint;
  std::vector<std::string> capabilities;
  Key32 public_key{};  // X25519 identity, pinned by clients
  // Model servers may publish their input shape and class labels.
  Shape input_shape;
  std::vector<std::string> labels;

  bool has(const std::string& tag) const;
};

// Keyword set mapping a query onto a capability tag.
struct RoutingRule {
  std::string tag;
  std::vector<std::string> keywords;
};

struct ServerRegistry {
  std::vector<ServerEntry> servers;
  std::vector<RoutingRule> rules;

  const ServerEntry* find(const std::string& id) const;
};

nlohmann::json registry_to_json(const ServerRegistry& reg);
// Throws kValidation on duplicate ids or entries without capabilities.
ServerRegistry registry_from_json(const nlohmann::json& doc);

// Ed25519 key for signing registry documents.
struct SigningKey {
  std::array<std::uint8_t, 32> public_key{};
  std::array<std::uint8_t, 64> secret_key{};

  static SigningKey generate(RandomSource& rng);
  std::string to_json() const;
  static SigningKey from_json(const std::string& text);
};

// {"registry": ..., "signer": hex, "signature": hex}; the signature covers
// the compact dump of the registry object.
std::string sign_registry(const ServerRegistry& reg, const SigningKey& key);
// Throws kAuthFailure when the signature is invalid or the signer is not
// the trusted key.
ServerRegistry verify_registry(const std::string& signed_doc, const std::array<std::uint8_t, 32>& trusted);

// ---- routing --------------------------------------------------------------

class Router {
 public:
  virtual ~Router() = default;
  // Returns a capability tag for the query; throws kNoRoute when none fits.
  virtual std::string classify(const std::string& query, const ServerRegistry& reg) = 0;
};

// Scores each rule by the number of its keywords present in the query as
// whole words; the highest score wins and ties go to the earlier rule.
class KeywordRouter final : public Router {
 public:
  std::string classify(const std::string& query, const ServerRegistry& reg) override;
};

// Minimal client for an OpenAI-style chat completions endpoint
// ("http://host:port/path").
class ChatClient {
 public:
  ChatClient(std::string url, std::string model, std::chrono::milliseconds timeout = std::chrono::seconds(10));
  // Throws kNetwork when the endpoint is unreachable or answers badly.
  std::string complete(const std::string& system, const std::string& user) const;

 private:
  std::string host_;
  int port_ = 80;
  std::string path_;
  std::string model_;
  std::chrono::milliseconds timeout_;
};

// Asks the chat endpoint for one of the registry's tags. The answer is
// validated by route_intent like any other router output.
class ChatRouter final : public Router {
 public:
  explicit ChatRouter(ChatClient client) : client_(std::move(client)) {}
  std::string classify(const std::string& query, const ServerRegistry& reg) override;

 private:
  ChatClient client_;
};

struct RoutePlan {
  ServerEntry model;
  ServerEntry cloud;
  std::string task;
};

// kEmptyQuery for blank queries, kNoRoute when the registry has no server
// carrying the tag or no cloud server.
RoutePlan route_intent(const std::string& query, const ServerRegistry& reg, Router& router);

// ---- session keys ---------------------------------------------------------

inline constexpr std::size_t kEncapsulationSize = 32 + 32 + 16;

// The one-time key is sealed to the cloud's X25519 key: an ephemeral key
// agreement derives a wrapping key and ChaCha20-Poly1305 encrypts k with the
// channel session id as associated data.
Bytes encapsulate(const Key32& k, const SessionId& sid, const Key32& cloud_pk, RandomSource& rng);
// Throws kDecapsulation.
Key32 decapsulate(std::span<const std::uint8_t> enc, const SessionId& sid, const net::StaticKeyPair& cloud);
Key32 confirmation_tag(const Key32& k, const SessionId& sid, std::span<const std::uint8_t> enc);

// Remembers encapsulations already accepted.
class ReplayCache {
 public:
  // False when the encapsulation was seen before.
  bool insert(std::span<const std::uint8_t> enc);

 private:
  std::mutex mu_;
  std::set<Key32> seen_;
};

enum class Direction : std::uint8_t { kUserToCloud = 0, kCloudToUser = 1 };

// ChaCha20-Poly1305 under the session key with 96-bit nonces made of the
// direction and a per-direction message counter.
class AeadStream {
 public:
  AeadStream(const Key32& key, Direction outgoing);
  Bytes seal(std::span<const std::uint8_t> plain, std::span<const std::uint8_t> aad);
  // Throws kAead.
  Bytes open(std::span<const std::uint8_t> ct, std::span<const std::uint8_t> aad);

 private:
  Key32 key_;
  Direction out_;
  std::uint64_t send_ctr_ = 0;
  std::uint64_t recv_ctr_ = 0;
};

// ---- control plane --------------------------------------------------------

// Requests travel as one JSON line followed by an optional binary body.
struct Request {
  nlohmann::json header;
  Bytes body;
};
void send_request(net::Channel& ch, net::MsgTag tag, const nlohmann::json& header, std::span<const std::uint8_t> body);
Request recv_request(net::Channel& ch, net::MsgTag tag);

// ---- servers --------------------------------------------------------------

struct ServerConfig {
  net::StaticKeyPair identity;
  runtime::SessionOptions session;
  // Per-session randomness derives from (seed, token) when set.
  std::optional<std::uint64_t> seed;
  std::chrono::milliseconds timeout{30000};
};

// Accept loop shared by both daemons: one thread per connection.
class Daemon {
 public:
  explicit Daemon(ServerConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Daemon();

  // Serves until `stop` is set.
  void serve(net::TcpListener& listener, const std::atomic<bool>& stop);
  std::vector<runtime::SessionReport> reports() const;
  std::size_t failures() const { return failures_; }
  const ServerConfig& config() const { return cfg_; }

 protected:
  virtual void handle(net::HandshakeResult hs) = 0;
  Prng session_rng(const SessionId& token, std::string_view role) const;
  void record(runtime::SessionReport r);

  ServerConfig cfg_;

 private:
  void run_connection(std::unique_ptr<net::Transport> t);

  mutable std::mutex mu_;
  std::vector<runtime::SessionReport> reports_;
  std::atomic<std::size_t> failures_{0};
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::vector<Worker> workers_;
};

class ModelServer final : public Daemon {
 public:
  ModelServer(model::ModelSpec m, ServerConfig cfg, net::Endpoint cloud, Key32 cloud_key);

 protected:
  void handle(net::HandshakeResult hs) override;

 private:
  model::ModelSpec model_;
  net::Endpoint cloud_;
  Key32 cloud_key_;
};

class CloudServer final : public Daemon {
 public:
  // When set, only this model server key may open peer sessions.
  CloudServer(ServerConfig cfg, std::optional<Key32> model_key);

 protected:
  void handle(net::HandshakeResult hs) override;

 private:
  void serve_user(net::Channel& ch);
  std::unique_ptr<net::Channel> wait_peer(const SessionId& token);

  std::optional<Key32> model_key_;
  ReplayCache replay_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<SessionId, std::unique_ptr<net::Channel>> peers_;
};

// ---- user -----------------------------------------------------------------

enum class Tamper { kNone, kEncapsulation, kX1Ciphertext, kRes1Ciphertext };

// User side of phase 1 over a channel to the cloud: sends a fresh key k
// sealed to cloud_pk and checks the cloud's confirmation tag. Throws
// kConfirmation when the cloud rejects or mis-confirms the key.
Key32 establish_session(net::Channel& cloud, const Key32& cloud_pk, RandomSource& rng, Tamper tamper = Tamper::kNone);

using TransportWrap =
    std::function<std::unique_ptr<net::Transport>(std::unique_ptr<net::Transport>, const ServerEntry&)>;

struct UserOptions {
  std::chrono::milliseconds timeout{60000};
  // Test hooks: wrap the user's transports or damage a sealed share.
  TransportWrap wrap;
  Tamper tamper = Tamper::kNone;
};

struct InferenceOutcome {
  FixedTensor result;
  nlohmann::json model_report;
  net::CommStats model_link, cloud_link;
  double seconds = 0;
};

// Phases 1, 3 and 4: establishes the session key with the cloud, shares x,
// sends x_0 to the model server and sealed x_1 to the cloud, and
// reconstructs res = res_0 + res_1. x is one sample or a batch.
InferenceOutcome dispatch_and_reconstruct(const FixedTensor& x, const RoutePlan& plan, RandomSource& rng,
                                          const UserOptions& opts = {});

// ---- response -------------------------------------------------------------

struct Prediction {
  std::string label;
  double score;
};

// Scores sorted descending; equal scores keep label order.
std::vector<Prediction> top_k(std::span<const double> scores, const std::vector<std::string>& labels, std::size_t k);
std::string template_response(const std::string& query, const std::vector<Prediction>& preds);

struct Response {
  std::string text;
  bool fallback = false;  // the external backend failed and the template answered
  std::string warning;
};

// The external composer, when given, receives the query and the top
// predictions; any failure falls back to the template with a warning.
Response compose_response(const std::string& query, const FixedTensor& logits, const std::vector<std::string>& labels,
                          const ChatClient* external = nullptr, std::size_t k = 3);

}  // namespace pinfer::orch
