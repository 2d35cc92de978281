#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stmforge {

// FNV-1a over a tag string, used to derive independent substreams from one
// base seed. Keying by (seed, tag) keeps stage application reproducible no
// matter how the caller threads the stages.
std::uint64_t hash_tag(std::string_view tag);

// SplitMix64 finalizer; mixes a seed with a stream key.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

// Deterministic random stream. All samplers are implemented here rather
// than via std::*_distribution so output bytes are stable across standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    Rng(std::uint64_t seed, std::string_view tag) : gen_(mix_seed(seed, hash_tag(tag))) {}
    Rng(std::uint64_t seed, std::string_view tag, std::uint64_t index)
        : gen_(mix_seed(mix_seed(seed, hash_tag(tag)), index)) {}

    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal (Box-Muller, one spare cached).
    double normal();
    // Poisson with the given mean; exact for any mean (chunked Knuth).
    std::uint64_t poisson(double mean);

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace stmforge
