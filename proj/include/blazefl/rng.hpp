#pragma once

// Deterministic seed derivation and isolated random streams.
//
// Every source of client-local randomness (shuffling, augmentation, dropout,
// client sampling) draws from its own stream, seeded from
// (base_seed, domain, client_id, round). Streams are single-owner, move-only
// values with no global state, so worker scheduling can never change which
// client consumes which draw. All operations consume a number of draws that
// depends only on input sizes, never on drawn values.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace blazefl::rng {

// Purpose tags for seed derivation. The numeric values are part of the
// on-disk/golden-fixture contract and must never change.
enum class SeedDomain : std::uint64_t {
  ServerInit = 1,
  ClientSampling = 2,
  ClientShuffle = 3,
  ClientAugment = 4,
  ClientDropout = 5,
  EvalShuffle = 6,  // reserved; evaluation is order-fixed and draws nothing
};

namespace detail {

inline constexpr std::uint64_t kGamma1 = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kGamma2 = 0xC2B2AE3D27D4EB4FULL;
inline constexpr std::uint64_t kGamma3 = 0x165667B19E3779F9ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t avalanche(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Pure function of its four arguments. The mixing constants are frozen;
// changing them breaks every golden fixture and saved partition.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, SeedDomain domain,
                                    std::uint64_t client_id,
                                    std::uint64_t round) {
  std::uint64_t x = detail::avalanche(
      base_seed ^ (static_cast<std::uint64_t>(domain) * detail::kGamma1));
  x = detail::avalanche(x ^ (client_id * detail::kGamma2));
  x = detail::avalanche(x ^ (round * detail::kGamma3));
  return x;
}

// xoshiro256** generator with a draw counter. Move-only: a stream belongs to
// exactly one consumer, which is what makes the draw-count audits meaningful.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    // Expand the seed through four SplitMix64 draws.
    std::uint64_t x = seed;
    for (auto& word : state_) {
      x += detail::kGamma1;
      word = detail::avalanche(x);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
      state_[3] = detail::kGamma1;  // xoshiro must never be all-zero
    }
  }

  RngStream(const RngStream&) = delete;
  RngStream& operator=(const RngStream&) = delete;
  RngStream(RngStream&&) = default;
  RngStream& operator=(RngStream&&) = default;

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    ++consumed_;
    return result;
  }

  /// Number of 64-bit draws consumed so far.
  std::uint64_t consumed() const { return consumed_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t consumed_ = 0;
};

/// Uniform double in [0,1); consumes exactly one draw.
inline double next_uniform(RngStream& stream) {
  return static_cast<double>(stream.next_u64() >> 11) * 0x1.0p-53;
}

// Non-caching Box-Muller: always two draws per call, so consumption stays a
// function of call count alone.
inline double next_gaussian(RngStream& stream) {
  double u1 = next_uniform(stream);
  const double u2 = next_uniform(stream);
  if (u1 == 0.0) {
    u1 = 0x1.0p-53;  // smallest value next_uniform can produce
  }
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi_v<double> * u2);
}

// Bounded draw via multiply-shift reduction. Biased by at most bound/2^64,
// accepted in exchange for consuming exactly one draw per call.
inline std::uint64_t next_bounded(RngStream& stream, std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("next_bounded: bound must be positive");
  }
  using u128 = unsigned __int128;
  return static_cast<std::uint64_t>(
      (static_cast<u128>(stream.next_u64()) * static_cast<u128>(bound)) >> 64);
}

/// Fisher-Yates from the last index downward; consumes exactly size-1 draws.
template <typename T>
void shuffle(RngStream& stream, std::span<T> items) {
  for (std::size_t i = items.size(); i-- > 1;) {
    const auto j =
        static_cast<std::size_t>(next_bounded(stream, static_cast<std::uint64_t>(i) + 1));
    using std::swap;
    swap(items[i], items[j]);
  }
}

template <typename T>
void shuffle(RngStream& stream, std::vector<T>& items) {
  shuffle(stream, std::span<T>(items));
}

// Partial Fisher-Yates over [0,n). The returned order is the selection order,
// which downstream code treats as the canonical sampled list. Consumes
// exactly k draws.
inline std::vector<std::int64_t> sample_without_replacement(RngStream& stream,
                                                            std::int64_t n,
                                                            std::int64_t k) {
  if (n < 0 || k < 0 || k > n) {
    throw std::invalid_argument(
        "sample_without_replacement: need 0 <= k <= n");
  }
  std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), std::int64_t{0});
  for (std::int64_t i = 0; i < k; ++i) {
    const auto offset = static_cast<std::int64_t>(
        next_bounded(stream, static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(i + offset)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

// The per-client bundle of isolated generators for one round. Each member
// stream comes from a distinct domain, so no two purposes ever share draws.
struct RngStreamSuite {
  std::int64_t client_id;
  std::int64_t round;
  RngStream shuffle;
  RngStream augment;
  RngStream dropout;
};

inline RngStreamSuite make_suite(std::uint64_t base_seed,
                                 std::int64_t client_id, std::int64_t round) {
  const auto cid = static_cast<std::uint64_t>(client_id);
  const auto rnd = static_cast<std::uint64_t>(round);
  return RngStreamSuite{
      client_id, round,
      RngStream(derive_seed(base_seed, SeedDomain::ClientShuffle, cid, rnd)),
      RngStream(derive_seed(base_seed, SeedDomain::ClientAugment, cid, rnd)),
      RngStream(derive_seed(base_seed, SeedDomain::ClientDropout, cid, rnd))};
}

}  // namespace blazefl::rng
