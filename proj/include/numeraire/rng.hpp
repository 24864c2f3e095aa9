#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace numeraire {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is identified by (seed, stream, substream). The 64-bit key is
// derived from (seed, stream); the substream occupies the upper counter words
// and the draw index the lower words, so every (seed, stream, substream)
// triple yields an independent sequence that does not depend on the order in
// which streams are consumed. Satisfies UniformRandomBitGenerator.
class PhiloxStream {
public:
    using result_type = std::uint64_t;

    PhiloxStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    // Uniform on the open interval (0, 1).
    double uniform();

    std::uint64_t draws() const { return counter_lo_; }

    // Raw block function, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key);

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t substream_;
    std::uint64_t counter_lo_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffered_ = 0;
};

// SplitMix64 finalizer; used to derive keys from user seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace numeraire
