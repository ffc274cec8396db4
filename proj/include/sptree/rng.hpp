#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace sptree {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Named stream: (master seed, purpose, replica) -> independent seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t replica = 0) {
    return splitmix64(splitmix64(master ^ fnv1a(purpose)) + splitmix64(replica + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : eng_(seed), seed_(seed) {}
    Rng(std::uint64_t master, std::string_view purpose, std::uint64_t replica = 0)
        : Rng(derive_seed(master, purpose, replica)) {}

    // in (0,1)
    double uniform() {
        double u;
        do {
            u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        } while (u == 0.0);
        return u;
    }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double exponential(double rate) { return -std::log(uniform()) / rate; }
    bool bernoulli(double p) { return uniform() < p; }
    long poisson(double mean) {
        std::poisson_distribution<long> d(mean);
        return d(eng_);
    }
    std::uint64_t seed() const { return seed_; }
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_;
};

}  // namespace sptree
