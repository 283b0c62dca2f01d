#pragma once

#include <memory>

#include "pinfer/gadgets/gadgets.hpp"
#include "support/two_party.hpp"

namespace testing_support {

enum class OtKind { kDealer, kIknp };

// Owner and cloud gadget sessions over an in-memory channel.
struct GadgetPair {
  ChannelPair ch;
  pinfer::Prng owner_rng, cloud_rng;
  std::unique_ptr<pinfer::ot::OtEngine> owner_ot, cloud_ot;
  std::unique_ptr<pinfer::gadgets::Session> owner, cloud;

  explicit GadgetPair(std::uint64_t seed, OtKind kind = OtKind::kDealer)
      : ch(connected_pair(seed)),
        owner_rng(pinfer::Prng::derive_seed(seed, "owner")),
        cloud_rng(pinfer::Prng::derive_seed(seed, "cloud")) {
    using namespace pinfer;
    if (kind == OtKind::kDealer) {
      const Seed shared = Prng::derive_seed(seed, "dealer");
      owner_ot = std::make_unique<ot::DealerEngine>(shared, true);
      cloud_ot = std::make_unique<ot::DealerEngine>(shared, false);
    } else {
      owner_ot = std::make_unique<ot::IknpEngine>(*ch.a, Prng::derive_seed(seed, "iknp-owner"));
      cloud_ot = std::make_unique<ot::IknpEngine>(*ch.b, Prng::derive_seed(seed, "iknp-cloud"));
    }
    owner = std::make_unique<gadgets::Session>(PartyId::kOwner, *ch.a, *owner_ot, owner_rng);
    cloud = std::make_unique<gadgets::Session>(PartyId::kCloud, *ch.b, *cloud_ot, cloud_rng);
  }

  template <class F, class G>
  void run(F&& f_owner, G&& f_cloud) {
    run_pair([&] { f_owner(*owner); }, [&] { f_cloud(*cloud); });
  }
};

// Splits each value into two random additive shares mod 2^bits.
struct SplitWords {
  std::vector<std::uint64_t> s0, s1;
};

inline SplitWords split_words(std::span<const std::uint64_t> x, unsigned bits, pinfer::Prng& rng) {
  const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  SplitWords out{std::vector<std::uint64_t>(x.size()), std::vector<std::uint64_t>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.s1[i] = rng.next_bits(bits);
    out.s0[i] = (x[i] - out.s1[i]) & mask;
  }
  return out;
}

}  // namespace testing_support
