#pragma once

#include <cstdint>

namespace swag {

// Stateless counter-based randomness. Every draw is a pure function of its
// key, so results do not depend on evaluation order or thread count.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x632BE59BD9B4E019ull)); }

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return hash_key(hash_key(a, b), c); }

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return hash_key(hash_key(a, b, c), d);
}

/// Uniform double in the open interval (0, 1).
inline double uniform_open(std::uint64_t key) { return (double(key >> 11) + 0.5) * (1.0 / 9007199254740992.0); }

/// Small sequential generator seeded from a key; used where a stream of draws is needed.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return hash_key(key_, counter_++); }
    double uniform() { return uniform_open(next_u64()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }
    double normal();

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace swag
