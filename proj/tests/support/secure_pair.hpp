#pragma once

#include <functional>
#include <memory>

#include "pinfer/common/bytes.hpp"
#include "pinfer/runtime/runtime.hpp"
#include "support/two_party.hpp"

namespace testing_support {

// Records every byte written through the wrapped transport.
class RecordingTransport final : public pinfer::net::Transport {
 public:
  RecordingTransport(std::unique_ptr<pinfer::net::Transport> inner, std::shared_ptr<pinfer::Bytes> log)
      : inner_(std::move(inner)), log_(std::move(log)) {}
  void write_all(std::span<const std::uint8_t> data) override {
    log_->insert(log_->end(), data.begin(), data.end());
    inner_->write_all(data);
    sent_ += data.size();
  }
  void read_exact(std::span<std::uint8_t> out) override {
    inner_->read_exact(out);
    received_ += out.size();
  }
  void close() override { inner_->close(); }

 private:
  std::unique_ptr<pinfer::net::Transport> inner_;
  std::shared_ptr<pinfer::Bytes> log_;
};

using TransportWrap =
    std::function<std::unique_ptr<pinfer::net::Transport>(std::unique_ptr<pinfer::net::Transport>)>;

struct SecureRun {
  pinfer::runtime::PeerResult owner, cloud;
  std::shared_ptr<pinfer::Bytes> owner_wrote, cloud_wrote;
  std::uint64_t owner_transport_sent = 0, owner_transport_received = 0;
  pinfer::FixedTensor result() const { return pinfer::reconstruct(owner.share, cloud.share); }
};

// Shares x, runs owner and cloud sessions over a recorded in-memory channel
// and returns both results. All randomness derives from `seed`.
inline SecureRun run_secure(const pinfer::model::ModelSpec& m, const pinfer::FixedTensor& x,
                            pinfer::runtime::SessionOptions opts, std::uint64_t seed,
                            const TransportWrap& wrap_owner = {}) {
  using namespace pinfer;
  SecureRun run;
  run.owner_wrote = std::make_shared<Bytes>();
  run.cloud_wrote = std::make_shared<Bytes>();
  auto [ta, tb] = net::memory_pipe();
  if (wrap_owner) ta = wrap_owner(std::move(ta));
  auto ra = std::make_unique<RecordingTransport>(std::move(ta), run.owner_wrote);
  auto rb = std::make_unique<RecordingTransport>(std::move(tb), run.cloud_wrote);
  const RecordingTransport* owner_transport = ra.get();
  Prng share_rng(Prng::derive_seed(seed, "share"));
  const auto sh = share(x, share_rng);
  Prng owner_rng(Prng::derive_seed(seed, "owner")), cloud_rng(Prng::derive_seed(seed, "cloud"));
  opts.dealer_seed = Prng::derive_seed(seed, "dealer");
  net::HandshakeOptions oa{net::StaticKeyPair::generate(owner_rng), std::nullopt};
  net::HandshakeOptions ob{net::StaticKeyPair::generate(cloud_rng), std::nullopt};
  net::SessionId sid{};
  sid[0] = static_cast<std::uint8_t>(seed);
  run_pair(
      [&] {
        auto hs = net::handshake_initiate(std::move(ra), sid, net::Purpose::kPeer, oa, owner_rng);
        run.owner = runtime::run_owner_session(*hs.channel, m, sh.share0, opts, owner_rng);
        run.owner_transport_sent = owner_transport->bytes_sent();
        run.owner_transport_received = owner_transport->bytes_received();
      },
      [&] {
        auto hs = net::handshake_respond(std::move(rb), ob, cloud_rng);
        run.cloud = runtime::run_cloud_session(*hs.channel, sh.share1, opts, cloud_rng);
      });
  return run;
}

}  // namespace testing_support
