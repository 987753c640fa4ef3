#include "cbo/random.hpp"

#include <cmath>
#include <numbers>

namespace cbo {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on raw engine output, so streams do not depend on the standard library.
Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  double* x = out.data();
  const Eigen::Index n = out.size();
  for (Eigen::Index i = 0; i < n; i += 2) {
    const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    x[i] = r * std::cos(t);
    if (i + 1 < n) x[i + 1] = r * std::sin(t);
  }
  return out;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

Vector uniform_in(Rng& rng, const BoundedBox& box) {
  Vector z(box.lo.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = box.lo[j] + uniform01(rng) * (box.hi[j] - box.lo[j]);
  return z;
}

}  // namespace cbo
