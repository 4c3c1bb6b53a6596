#pragma once

#include <cstdint>
#include <vector>

namespace interlab {

// Deterministic splitmix64 stream. Used instead of <random> distributions
// because their output is implementation-defined and the tool promises
// bit-identical reruns. Streams are cheap to derive per purpose, so worker
// scheduling can never change what gets sampled.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform on [lo, hi).
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller (one spare cached).
    double normal();

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // k distinct indices from [0, n), order randomized (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Mixes a base seed with tag words into an independent stream seed, so e.g.
// the smoothing draws of step 7 never depend on how many draws step 6 made.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index);

}  // namespace interlab
