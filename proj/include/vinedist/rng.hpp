#ifndef VINEDIST_RNG_HPP
#define VINEDIST_RNG_HPP

/** @file
 * Seeded random streams.  Every stochastic routine takes an Rng&; independent
 * tasks get their own stream derived from (master seed, name, index), so
 * results never depend on scheduling.
 */

#include <cstdint>
#include <random>
#include <string_view>

namespace vinedist {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) noexcept
{
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace detail

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed)
    {
        std::uint64_t s = seed;
        std::seed_seq seq{static_cast<std::uint32_t>(detail::splitmix64(s)),
                          static_cast<std::uint32_t>(detail::splitmix64(s)),
                          static_cast<std::uint32_t>(detail::splitmix64(s)),
                          static_cast<std::uint32_t>(detail::splitmix64(s))};
        engine_.seed(seq);
    }

    /// Stream for a named task; same arguments give the same stream.
    static Rng stream(std::uint64_t master, std::string_view name, std::uint64_t index = 0)
    {
        std::uint64_t s = master ^ detail::fnv1a(name);
        s = detail::splitmix64(s) ^ (index * 0xd1b54a32d192ed03ULL);
        return Rng(detail::splitmix64(s));
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on the open interval (0,1), 53-bit resolution.
    double uniform()
    {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace vinedist

#endif
