#include "contbench/rng.hpp"

#include <cmath>

namespace contbench {

int Rng::uniform_int(int n) {
    // Rejection sampling over the top bits; exact uniformity over [0, n).
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return static_cast<int>(x % un);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

namespace {

// FNV-1a over the name, then splitmix64 finalizer to decorrelate streams.
uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s, uint64_t h) {
    for (const char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

uint64_t derive_seed(uint64_t root_seed, std::string_view stream_name) {
    return mix64(fnv1a(stream_name, 0xcbf29ce484222325ULL) ^ mix64(root_seed));
}

uint64_t derive_seed(uint64_t root_seed, std::string_view stream_name, uint64_t index) {
    return mix64(derive_seed(root_seed, stream_name) ^ mix64(index + 0x51ed2701afce19fbULL));
}

}  // namespace contbench
