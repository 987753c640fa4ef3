#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cbo/types.hpp"

namespace cbo {

using Rng = std::mt19937_64;

/// Independent child seed for a named sub-stream (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform draw in [0, 1) from the top 53 bits of one engine output.
double uniform01(Rng& rng);

/// rows x cols matrix of independent standard normal draws.
Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Index in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Fisher-Yates; unlike std::shuffle the result is fixed across standard libraries.
void shuffle(std::vector<std::size_t>& v, Rng& rng);

/// Uniform point inside the box.
Vector uniform_in(Rng& rng, const BoundedBox& box);

}  // namespace cbo
