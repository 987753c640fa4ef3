#include "cbo/types.hpp"

#include <string>

#include "cbo/errors.hpp"

namespace cbo {

BoundedBox::BoundedBox(Vector lower, Vector upper) : lo(std::move(lower)), hi(std::move(upper)) {
  validate();
}

BoundedBox BoundedBox::unit(std::size_t dim) { return uniform(dim, 0.0, 1.0); }

BoundedBox BoundedBox::uniform(std::size_t dim, double lo, double hi) {
  const auto n = static_cast<Eigen::Index>(dim);
  return BoundedBox(Vector::Constant(n, lo), Vector::Constant(n, hi));
}

bool BoundedBox::contains(const Vector& z) const {
  if (z.size() != lo.size()) return false;
  return (z.array() >= lo.array()).all() && (z.array() <= hi.array()).all();
}

Vector BoundedBox::clamp(const Vector& z) const { return z.cwiseMax(lo).cwiseMin(hi); }

Vector BoundedBox::to_unit(const Vector& z) const {
  return ((z - lo).array() / (hi - lo).array()).matrix();
}

Vector BoundedBox::from_unit(const Vector& u) const {
  return (lo.array() + u.array() * (hi - lo).array()).matrix();
}

void BoundedBox::validate() const {
  if (lo.size() != hi.size()) throw ConfigError("bounds", "lo and hi have different lengths");
  if (lo.size() == 0) throw ConfigError("bounds", "empty box");
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    if (!(lo[j] < hi[j])) {
      throw ConfigError("bounds", "lo < hi violated on axis " + std::to_string(j));
    }
  }
}

}  // namespace cbo
