#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "cbo/types.hpp"

namespace cbo {

/// Value of a function to maximize; fills `grad` (same size as z).
using Objective = std::function<double(const Vector& z, Vector& grad)>;

struct BoxOptimizerConfig {
  std::size_t restarts = 10;
  std::size_t max_steps = 100;
  /// Stop when the projected gradient (in unit-cube coordinates) falls below this.
  double tolerance = 1e-6;
  std::size_t history = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BoxOptimum {
  Vector z;
  double value = 0;
  std::size_t best_restart = 0;
  std::size_t evaluations = 0;
  /// Every restart stopped on a failed line search before converging; z is
  /// then simply the best point evaluated.
  bool degraded = false;
};

/// Multi-start projected L-BFGS maximization over a box. Starts are uniform
/// draws seeded by cfg.seed, run in order; the best final value wins and
/// ties go to the lowest restart index. The search runs in unit-cube
/// coordinates so that badly scaled boxes behave alike.
BoxOptimum maximize_in_box(const Objective& f, const BoundedBox& bounds, const BoxOptimizerConfig& cfg);

/// One projected L-BFGS run from `start`. `failed` is set when it stopped on a
/// line-search failure rather than convergence or the step limit.
BoxOptimum maximize_from(const Objective& f, const BoundedBox& bounds, const Vector& start,
                         const BoxOptimizerConfig& cfg, bool* failed = nullptr);

}  // namespace cbo
