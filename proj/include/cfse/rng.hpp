#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cfse {

using Rng = std::mt19937_64;

// Stable 64-bit tag for a named random stream.
std::uint64_t stream_tag(std::string_view name);

// Counter-based derivation: the stream for (master, tag, index) does not
// depend on how many other streams were drawn before it.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

Rng make_rng(std::uint64_t seed);

}  // namespace cfse
