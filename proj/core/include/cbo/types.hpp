#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace cbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in the d-dimensional design space.
using LatentPoint = Eigen::VectorXd;

/// Axis-aligned box bounds, one [lo, hi] interval per dimension.
struct BoundedBox {
  Vector lo;
  Vector hi;

  BoundedBox() = default;
  BoundedBox(Vector lower, Vector upper);

  /// Unit hypercube [0,1]^d.
  static BoundedBox unit(std::size_t dim);
  /// Same interval [lo, hi] on every axis.
  static BoundedBox uniform(std::size_t dim, double lo, double hi);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(lo.size()); }
  bool contains(const Vector& z) const;
  Vector clamp(const Vector& z) const;
  /// Maps z from this box onto [0,1]^d.
  Vector to_unit(const Vector& z) const;
  Vector from_unit(const Vector& u) const;
  /// Throws ConfigError unless lo < hi on every axis.
  void validate() const;
};

}  // namespace cbo
