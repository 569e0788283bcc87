#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dcmgnn {

using Rng = std::mt19937_64;

// Independent generator for a named sub-stream of one run seed. Streams with
// different names never share draws, so enabling a feature that consumes one
// stream leaves the others untouched.
Rng make_stream(std::uint64_t seed, std::string_view name);

}  // namespace dcmgnn
