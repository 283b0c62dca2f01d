#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <httplib.h>
#include <sodium.h>

#include "pinfer/orchestrator/orchestrator.hpp"

namespace pinfer::orch {

using nlohmann::json;

bool ServerEntry::has(const std::string& tag) const {
  return std::find(capabilities.begin(), capabilities.end(), tag) != capabilities.end();
}

const ServerEntry* ServerRegistry::find(const std::string& id) const {
  for (const auto& s : servers) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

json registry_to_json(const ServerRegistry& reg) {
  json servers = json::array();
  for (const auto& s : reg.servers) {
    json e{{"id", s.id},
           {"endpoint", s.endpoint.str()},
           {"capabilities", s.capabilities},
           {"public_key", to_hex(s.public_key)}};
    if (!s.input_shape.empty()) e["input_shape"] = s.input_shape;
    if (!s.labels.empty()) e["labels"] = s.labels;
    servers.push_back(std::move(e));
  }
  json rules = json::array();
  for (const auto& r : reg.rules) rules.push_back({{"tag", r.tag}, {"keywords", r.keywords}});
  return {{"version", 1}, {"servers", servers}, {"rules", rules}};
}

ServerRegistry registry_from_json(const json& doc) {
  ServerRegistry reg;
  try {
    for (const auto& e : doc.at("servers")) {
      ServerEntry s;
      s.id = e.at("id").get<std::string>();
      s.endpoint = net::Endpoint::parse(e.at("endpoint").get<std::string>());
      s.capabilities = e.at("capabilities").get<std::vector<std::string>>();
      const Bytes pk = from_hex(e.at("public_key").get<std::string>());
      require(pk.size() == 32, ErrorCode::kValidation, "server " + s.id + ": public key must be 32 bytes");
      std::copy(pk.begin(), pk.end(), s.public_key.begin());
      if (e.contains("input_shape")) s.input_shape = e["input_shape"].get<Shape>();
      if (e.contains("labels")) s.labels = e["labels"].get<std::vector<std::string>>();
      require(!s.id.empty(), ErrorCode::kValidation, "server id must not be empty");
      require(!s.capabilities.empty(), ErrorCode::kValidation, "server " + s.id + " has no capability tags");
      require(reg.find(s.id) == nullptr, ErrorCode::kValidation, "duplicate server id " + s.id);
      reg.servers.push_back(std::move(s));
    }
    if (doc.contains("rules")) {
      for (const auto& r : doc["rules"]) {
        reg.rules.push_back({r.at("tag").get<std::string>(), r.at("keywords").get<std::vector<std::string>>()});
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed registry: ") + e.what());
  }
  return reg;
}

SigningKey SigningKey::generate(RandomSource& rng) {
  std::array<std::uint8_t, crypto_sign_SEEDBYTES> seed{};
  rng.fill(seed);
  SigningKey k;
  crypto_sign_seed_keypair(k.public_key.data(), k.secret_key.data(), seed.data());
  sodium_memzero(seed.data(), seed.size());
  return k;
}

std::string SigningKey::to_json() const {
  return json{{"type", "ed25519"}, {"public", to_hex(public_key)}, {"secret", to_hex(secret_key)}}.dump(2) + "\n";
}

SigningKey SigningKey::from_json(const std::string& text) {
  SigningKey k;
  try {
    const auto doc = json::parse(text);
    const Bytes pub = from_hex(doc.at("public").get<std::string>());
    const Bytes sec = from_hex(doc.at("secret").get<std::string>());
    require(pub.size() == 32 && sec.size() == 64, ErrorCode::kDecode, "signing key sizes");
    std::copy(pub.begin(), pub.end(), k.public_key.begin());
    std::copy(sec.begin(), sec.end(), k.secret_key.begin());
  } catch (const json::exception& e) {
    fail(ErrorCode::kDecode, std::string("malformed signing key: ") + e.what());
  }
  std::array<std::uint8_t, 32> derived{};
  crypto_sign_ed25519_sk_to_pk(derived.data(), k.secret_key.data());
  require(derived == k.public_key, ErrorCode::kDecode, "signing key halves do not match");
  return k;
}

std::string sign_registry(const ServerRegistry& reg, const SigningKey& key) {
  const std::string body = registry_to_json(reg).dump();
  std::array<std::uint8_t, crypto_sign_BYTES> sig{};
  crypto_sign_detached(sig.data(), nullptr, reinterpret_cast<const std::uint8_t*>(body.data()), body.size(),
                       key.secret_key.data());
  json doc{{"registry", json::parse(body)}, {"signer", to_hex(key.public_key)}, {"signature", to_hex(sig)}};
  return doc.dump(2) + "\n";
}

ServerRegistry verify_registry(const std::string& signed_doc, const std::array<std::uint8_t, 32>& trusted) {
  json doc;
  Bytes signer, sig;
  try {
    doc = json::parse(signed_doc);
    signer = from_hex(doc.at("signer").get<std::string>());
    sig = from_hex(doc.at("signature").get<std::string>());
  } catch (const std::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed signed registry: ") + e.what());
  }
  require(signer.size() == 32 && std::equal(signer.begin(), signer.end(), trusted.begin()), ErrorCode::kAuthFailure,
          "registry signed by an untrusted key");
  const std::string body = doc.at("registry").dump();
  require(sig.size() == crypto_sign_BYTES &&
              crypto_sign_verify_detached(sig.data(), reinterpret_cast<const std::uint8_t*>(body.data()),
                                          body.size(), trusted.data()) == 0,
          ErrorCode::kAuthFailure, "registry signature invalid");
  return registry_from_json(doc["registry"]);
}

// ---- routing ----

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Lowercase words joined by single spaces and padded with a space on each side.
std::string normalize(const std::string& text) {
  std::string out = " ";
  bool gap = false;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-') {
      if (gap && out.size() > 1) out += ' ';
      out += static_cast<char>(std::tolower(c));
      gap = false;
    } else {
      gap = true;
    }
  }
  return out + " ";
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string KeywordRouter::classify(const std::string& query, const ServerRegistry& reg) {
  const std::string q = normalize(query);
  const RoutingRule* best = nullptr;
  std::size_t best_score = 0;
  for (const auto& r : reg.rules) {
    std::size_t score = 0;
    for (const auto& k : r.keywords) {
      const std::string phrase = normalize(k);
      if (phrase.size() > 2 && q.find(phrase) != std::string::npos) ++score;
    }
    if (score > best_score) {
      best = &r;
      best_score = score;
    }
  }
  if (best == nullptr) fail(ErrorCode::kNoRoute, "no routing rule matches the query");
  return best->tag;
}

ChatClient::ChatClient(std::string url, std::string model, std::chrono::milliseconds timeout)
    : model_(std::move(model)), timeout_(timeout) {
  const std::string scheme = "http://";
  require(url.rfind(scheme, 0) == 0, ErrorCode::kInvalidArgument, "chat endpoint must be http://host:port/path");
  std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  path_ = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);
  const auto hostport = rest.substr(0, slash);
  const auto colon = hostport.rfind(':');
  host_ = hostport.substr(0, colon);
  if (colon != std::string::npos) port_ = std::stoi(hostport.substr(colon + 1));
}

std::string ChatClient::complete(const std::string& system, const std::string& user) const {
  httplib::Client cli(host_, port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  const json req{{"model", model_},
                 {"messages", json::array({{{"role", "system"}, {"content", system}},
                                           {{"role", "user"}, {"content", user}}})},
                 {"temperature", 0}};
  auto res = cli.Post(path_, req.dump(), "application/json");
  if (!res) fail(ErrorCode::kNetwork, "chat endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) fail(ErrorCode::kNetwork, "chat endpoint returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kNetwork, std::string("malformed chat response: ") + e.what());
  }
}

std::string ChatRouter::classify(const std::string& query, const ServerRegistry& reg) {
  std::vector<std::string> tags;
  for (const auto& s : reg.servers) {
    for (const auto& t : s.capabilities) {
      if (t != kCloudCapability && std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);
    }
  }
  std::string system = "Pick the capability tag that serves the user's request. Answer with the tag only, or none. Tags:";
  for (const auto& t : tags) system += " " + t;
  std::string tag = client_.complete(system, query);
  tag.erase(0, tag.find_first_not_of(" \t\r\n\"'`"));
  tag.erase(tag.find_last_not_of(" \t\r\n\"'`.") + 1);
  if (tag.empty() || lower(tag) == "none") fail(ErrorCode::kNoRoute, "chat router found no capability");
  return tag;
}

RoutePlan route_intent(const std::string& query, const ServerRegistry& reg, Router& router) {
  if (blank(query)) fail(ErrorCode::kEmptyQuery, "query is empty");
  if (reg.servers.empty()) fail(ErrorCode::kNoRoute, "registry is empty");
  const auto cloud = std::find_if(reg.servers.begin(), reg.servers.end(),
                                  [](const ServerEntry& s) { return s.has(kCloudCapability); });
  if (cloud == reg.servers.end()) fail(ErrorCode::kNoRoute, "registry has no cloud server");
  const std::string tag = router.classify(query, reg);
  for (const auto& s : reg.servers) {
    if (s.has(tag) && !s.has(kCloudCapability)) return {s, *cloud, tag};
  }
  fail(ErrorCode::kNoRoute, "no registered server offers " + tag);
}

// ---- responses ----

std::vector<Prediction> top_k(std::span<const double> scores, const std::vector<std::string>& labels,
                              std::size_t k) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kLabelMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(scores.size()) +
                                        " scores");
  }
  std::vector<Prediction> all;
  for (std::size_t i = 0; i < scores.size(); ++i) all.push_back({labels[i], scores[i]});
  std::stable_sort(all.begin(), all.end(), [](const Prediction& a, const Prediction& b) { return a.score > b.score; });
  all.resize(std::min(k, all.size()));
  return all;
}

namespace {

std::string fmt_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string template_response(const std::string& query, const std::vector<Prediction>& preds) {
  if (preds.empty()) return "No prediction is available.";
  std::ostringstream out;
  std::size_t tied = 1;
  while (tied < preds.size() && preds[tied].score == preds[0].score) ++tied;
  if (tied > 1) {
    out << "The result is a tie between ";
    for (std::size_t i = 0; i < tied; ++i) out << (i ? ", " : "") << preds[i].label;
    out << " (score " << fmt_score(preds[0].score) << ").";
  } else {
    out << "The most likely finding is " << preds[0].label << " (score " << fmt_score(preds[0].score) << ").";
  }
  if (tied < preds.size()) {
    out << " Other candidates: ";
    for (std::size_t i = tied; i < preds.size(); ++i) {
      out << (i > tied ? ", " : "") << preds[i].label << " (" << fmt_score(preds[i].score) << ")";
    }
    out << ".";
  }
  return out.str();
}

Response compose_response(const std::string& query, const FixedTensor& logits, const std::vector<std::string>& labels,
                          const ChatClient* external, std::size_t k) {
  const auto scores = logits.to_reals();
  if (labels.empty() || scores.size() % labels.size() != 0) {
    fail(ErrorCode::kLabelMismatch,
         std::to_string(labels.size()) + " labels for " + std::to_string(scores.size()) + " logits");
  }
  const std::size_t samples = scores.size() / labels.size();
  std::vector<std::vector<Prediction>> preds;
  for (std::size_t s = 0; s < samples; ++s) {
    preds.push_back(top_k(std::span(scores).subspan(s * labels.size(), labels.size()), labels, k));
  }
  Response r;
  if (external != nullptr) {
    std::string facts;
    for (std::size_t s = 0; s < samples; ++s) {
      if (samples > 1) facts += "Sample " + std::to_string(s) + ": ";
      for (const auto& p : preds[s]) facts += p.label + "=" + fmt_score(p.score) + " ";
      facts += "\n";
    }
    try {
      r.text = external->complete("Answer the user's question using only these classifier scores:\n" + facts, query);
      return r;
    } catch (const Error& e) {
      r.fallback = true;
      r.warning = std::string("external composer unavailable, used template: ") + e.what();
    }
  }
  for (std::size_t s = 0; s < samples; ++s) {
    if (s) r.text += "\n";
    if (samples > 1) r.text += "Sample " + std::to_string(s) + ": ";
    r.text += template_response(query, preds[s]);
  }
  return r;
}

}  // namespace pinfer::orch
