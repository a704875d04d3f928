#pragma once

#include <cstdint>
#include <random>

namespace qbell {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named, splittable random stream. A stream is identified by a 64-bit key;
// child(i) derives an independent sub-stream, so (seed, trial, lane, setting)
// paths map to disjoint generators regardless of the order they are used in.
//
// Draws come from std::mt19937_64 seeded with the key; its output sequence is
// fixed by the C++ standard, and uniform() below uses no library distribution,
// so sampling is reproducible across runs, compilers and platforms.
class RngStream {
public:
    explicit constexpr RngStream(std::uint64_t seed) noexcept : key_(splitmix64(seed)) {}

    constexpr RngStream child(std::uint64_t index) const noexcept {
        return RngStream(Key{}, splitmix64(key_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
    }

    constexpr std::uint64_t key() const noexcept { return key_; }

    class Engine {
    public:
        explicit Engine(std::uint64_t key) : gen_(key) {}
        // Uniform double in [0, 1) with 53 random bits.
        double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    private:
        std::mt19937_64 gen_;
    };

    Engine engine() const { return Engine(key_); }

    friend constexpr bool operator==(const RngStream&, const RngStream&) = default;

private:
    struct Key {};
    constexpr RngStream(Key, std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t key_;
};

}  // namespace qbell
