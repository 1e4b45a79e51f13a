#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace contbench {

/// Seeded RNG with hand-rolled distributions on top of the mt19937_64 word
/// stream, so that identical seeds give identical draws on every platform
/// and standard library.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    int uniform_int(int n);

    /// Standard normal via polar Box-Muller with a cached spare.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent stream seed from a root seed and a stream name,
/// so toggling one seeded component does not perturb the others.
uint64_t derive_seed(uint64_t root_seed, std::string_view stream_name);
uint64_t derive_seed(uint64_t root_seed, std::string_view stream_name, uint64_t index);

}  // namespace contbench
