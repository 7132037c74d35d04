#ifndef QOSEC_RNG_HPP
#define QOSEC_RNG_HPP

#include <array>
#include <cstdint>

namespace qosec {

// Deterministic generator with explicitly portable output streams.
// xoshiro256++ core, state expanded from a 64-bit seed via SplitMix64.
// Results must be bit-identical across platforms and worker counts, which
// rules out std::<random> distributions; all samplers are implemented here.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    // Independent substream for a unit of work (trial, sample, slot batch).
    // substream(master, i) and substream(master, j) are decorrelated for i != j.
    static Rng substream(std::uint64_t master, std::uint64_t index);

    std::uint64_t next_u64();

    // uniform on [0,1) with 53 random bits
    double uniform01();
    // uniform on (0,1], safe as a log() argument
    double uniform01_pos();

    double normal();                  // polar method, second value cached
    double exponential();             // mean 1
    double gamma(double shape);       // unit scale, shape > 0
    std::uint64_t poisson(double mean);

  private:
    std::array<std::uint64_t, 4> s_{};
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace qosec

#endif
