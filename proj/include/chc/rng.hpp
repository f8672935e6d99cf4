#pragma once
//
// Counter-based normal variates (Philox4x32-10 + Box–Muller).
//
// Every draw is a pure function of (seed, replica, domain, step, node, mode),
// so ensembles are reproducible regardless of scheduling and sub-step
// refinements never shift the stream of any other draw.

#include <array>
#include <cstdint>

namespace chc {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al. constants).
Philox4x32Counter philox4x32(Philox4x32Counter counter, Philox4x32Key key);

enum class RngDomain : std::uint32_t {
    Wiener = 0,
    Bridge = 1,
    Initial = 2,
    Auxiliary = 3,
};

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t replica);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t replica() const noexcept { return replica_; }
    /// The 64-bit Philox key of this stream.
    std::uint64_t stream_key() const noexcept {
        return static_cast<std::uint64_t>(key_[0]) | (static_cast<std::uint64_t>(key_[1]) << 32);
    }

    /// Two independent N(0, 1) draws addressed by (domain, step, node, pair).
    std::array<double, 2> normal_pair(RngDomain domain, std::uint64_t step, std::uint32_t node,
                                      std::uint32_t pair) const;

    /// Single N(0, 1) draw for a mode index: component (mode & 1) of pair mode/2.
    double normal(RngDomain domain, std::uint64_t step, std::uint32_t node, std::uint32_t mode) const;

    /// Uniform on [0, 1) addressed like normal_pair.
    double uniform(RngDomain domain, std::uint64_t step, std::uint32_t node, std::uint32_t index) const;

    /// Deterministic child stream, e.g. one per start state.
    CounterRng split(std::uint64_t salt) const;

private:
    Philox4x32Counter block(RngDomain domain, std::uint64_t step, std::uint32_t node,
                            std::uint32_t pair) const;

    std::uint64_t seed_;
    std::uint64_t replica_;
    Philox4x32Key key_{};
};

/// SplitMix64 finalizer; used for seed derivation and content hashing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace chc
