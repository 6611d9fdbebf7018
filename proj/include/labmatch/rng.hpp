#pragma once

#include <cstdint>
#include <random>

namespace labmatch {

using Rng = std::mt19937_64;

// Every random draw in the library comes from a stream identified by
// (root seed, purpose, up to three integer ids). Streams are independent of
// the order in which they are created, so parallel schedules replay exactly.
enum class Stream : std::uint64_t {
    covariates = 1,
    actions,
    firm_types,
    matching,
    beta_bank,
    bootstrap,
    mc_sims,
    two_stage,
    replication,
    figure,
    oracle,
    tie_break,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t root, Stream purpose, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

inline Rng make_rng(std::uint64_t root, Stream purpose, std::uint64_t a = 0,
                    std::uint64_t b = 0, std::uint64_t c = 0) {
    return Rng(derive_seed(root, purpose, a, b, c));
}

// Open-interval uniform on (0,1); never returns 0 or 1.
double uniform01(Rng& rng);

} // namespace labmatch
