#pragma once

#include <array>
#include <cstdint>

namespace fkpf {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

// Per-path stream: key = global seed, counter = (block index, stream id).
// Two streams with different ids never share a counter value.
class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint32_t next_u32();
    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    // Standard normal via Box-Muller; the second variate is cached.
    double normal();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    PhiloxCounter buf_{};
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fkpf
