#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nscreen {

using Rng = std::mt19937_64;

//! Deterministic child seed for a named stage, e.g. ("score", coordinate).
std::uint64_t derive_seed(std::uint64_t master,
                          std::string_view stage,
                          std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);

//! Worker count: NEURAL_SCREEN_THREADS wins over the requested value.
unsigned resolve_threads(unsigned requested);

} // namespace nscreen
