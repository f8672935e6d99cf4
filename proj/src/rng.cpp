#include "chc/rng.hpp"

#include <cmath>

namespace chc {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform in (0, 1]: never zero so log() is safe.
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(bits & ((1ULL << 53) - 1)) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

Philox4x32Counter CounterRng::block(RngDomain domain, std::uint64_t step, std::uint32_t node,
                                    std::uint32_t pair) const {
    const Philox4x32Counter ctr{
        static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
        (static_cast<std::uint32_t>(domain) << 28) ^ node, pair};
    return philox4x32(ctr, key_);
}

std::array<double, 2> CounterRng::normal_pair(RngDomain domain, std::uint64_t step,
                                              std::uint32_t node, std::uint32_t pair) const {
    const auto r = block(domain, step, node, pair);
    const double u1 = to_unit_open(r[0], r[1]);
    const double u2 = to_unit_open(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replica)
    : seed_(seed), replica_(replica) {
    const std::uint64_t k = mix64(seed_ ^ mix64(replica_ + 0x632BE59BD9B4E019ULL));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

double CounterRng::normal(RngDomain domain, std::uint64_t step, std::uint32_t node,
                          std::uint32_t mode) const {
    return normal_pair(domain, step, node, mode / 2)[mode & 1u];
}

double CounterRng::uniform(RngDomain domain, std::uint64_t step, std::uint32_t node,
                           std::uint32_t index) const {
    const auto r = block(domain, step, node, index);
    return to_unit_open(r[0], r[1]) - 0x1.0p-53;
}

CounterRng CounterRng::split(std::uint64_t salt) const {
    return CounterRng(mix64(seed_ ^ mix64(salt ^ 0xA0761D6478BD642FULL)), replica_);
}

}  // namespace chc
