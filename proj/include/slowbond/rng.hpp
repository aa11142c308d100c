#pragma once

#include <array>
#include <cstdint>

namespace slowbond {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11 reference
// constants).  Each (key, counter) block maps to four independent 32-bit
// words, so a stream is just a key plus a running block index.  Replica
// streams share the master key and differ in one counter lane, which makes
// every replica reproducible on its own regardless of scheduling.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream_id)),
          stream_hi_(static_cast<std::uint32_t>(stream_id >> 32)) {}

    // Uniform double in (0, 1]; strictly positive so log(u) is always finite.
    double next_u01() {
        const std::uint64_t bits = next_u64();
        return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
    }

    std::uint64_t next_u64() {
        if (word_ >= 4) refill();
        const std::uint64_t lo = block_[word_];
        const std::uint64_t hi = block_[word_ + 1];
        word_ += 2;
        return (hi << 32) | lo;
    }

    std::uint32_t next_u32() {
        if (word_ >= 4) refill();
        return block_[word_++];
    }

    // One keyed block, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    void refill() {
        block_ = block({static_cast<std::uint32_t>(block_index_),
                        static_cast<std::uint32_t>(block_index_ >> 32),
                        stream_lo_, stream_hi_},
                       key_);
        ++block_index_;
        word_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_lo_ = 0;
    std::uint32_t stream_hi_ = 0;
    std::uint64_t block_index_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int word_ = 4;
};

}  // namespace slowbond
