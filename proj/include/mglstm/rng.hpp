#pragma once

// Counter-based random numbers.
//
// The generator is Philox4x32-10 (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3"). A stream is identified by a 64-bit key; draw `i` of a
// stream is a pure function of (key, i), so any implementation of the same
// recipe reproduces the same numbers bit-exactly:
//
//   block(k)   = philox4x32_10(counter = {lo32(k), hi32(k), 0, 0},
//                              key     = {lo32(key), hi32(key)})
//   uniform(i) = ((uint64(w0) << 20 | w1 >> 12) + 0.5) * 2^-52,
//                where (w0, w1) = words 0,1 of block(i)
//   normal(2j), normal(2j+1) = Box-Muller on (u1, u2) taken from
//                words (0,1) and (2,3) of block(j):
//                r = sqrt(-2 ln u1); (r cos(2 pi u2), r sin(2 pi u2))

#include <array>
#include <cstdint>
#include <string_view>

namespace mglstm::rng {

using Block = std::array<std::uint32_t, 4>;

/// Ten-round Philox4x32 bijection.
Block philox4x32_10(Block counter, std::array<std::uint32_t, 2> key);

/// Map 52 random bits from two words to the open interval (0, 1).
double to_open_unit(std::uint32_t hi, std::uint32_t lo);

/// SplitMix64 finalizer; used to whiten seeds.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Derive an independent stream key from a global seed, a stage name and a tag
/// (typically a noise level).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, double tag);

/// Random-access view of one counter-based stream.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t key() const { return key_; }

    Block block(std::uint64_t index) const;
    double uniform(std::uint64_t index) const;
    double normal(std::uint64_t index) const;

private:
    std::uint64_t key_;
};

/// Sequential cursor over a stream, for code that just wants "the next draw".
class Generator {
public:
    explicit Generator(std::uint64_t key) : stream_(key) {}

    double uniform() { return stream_.uniform(next_uniform_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return stream_.normal(next_normal_++); }
    /// Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    Stream stream_;
    std::uint64_t next_uniform_ = 0;
    // Normals use a separate counter range so mixing calls stays reproducible.
    std::uint64_t next_normal_ = std::uint64_t{1} << 62;
};

}  // namespace mglstm::rng
