#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace coex
{

inline constexpr uint64_t
SplitMix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a key sequence.
inline constexpr uint64_t
HashKey(std::initializer_list<uint64_t> parts)
{
    uint64_t h = 0x6a09e667f3bcc909ULL;
    for (uint64_t p : parts)
    {
        h = SplitMix64(h ^ SplitMix64(p));
    }
    return h;
}

/// Uniform variate in the open interval (0, 1) from 53 hash bits.
inline double
HashUniform(uint64_t h)
{
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

/// Exponential variate with rate mu.
inline double
HashExponential(uint64_t h, double mu)
{
    return -std::log(HashUniform(h)) / mu;
}

/// Counter-based generator usable with <random> distributions.
class StreamRng
{
  public:
    using result_type = uint64_t;

    explicit StreamRng(uint64_t seed)
        : m_state(seed)
    {
    }

    static constexpr result_type min()
    {
        return 0;
    }

    static constexpr result_type max()
    {
        return std::numeric_limits<uint64_t>::max();
    }

    result_type operator()()
    {
        m_state += 0x9e3779b97f4a7c15ULL;
        return SplitMix64(m_state);
    }

    double Uniform()
    {
        return HashUniform((*this)());
    }

  private:
    uint64_t m_state;
};

/// Stream tags separating independent random families.
namespace stream
{
inline constexpr uint64_t kApPoints = 0xA1;
inline constexpr uint64_t kEnbPoints = 0xB2;
inline constexpr uint64_t kMac = 0xC3;
inline constexpr uint64_t kTimer = 0xD4;
inline constexpr uint64_t kPairFading = 0xE5;
inline constexpr uint64_t kProbeFading = 0xF6;
inline constexpr uint64_t kProbes = 0x17;
inline constexpr uint64_t kDuty = 0x28;
inline constexpr uint64_t kOracle = 0x39;
inline constexpr uint64_t kCdf = 0x4A;
} // namespace stream

} // namespace coex
