#pragma once

#include <array>

#include "cbo/bo_engine.hpp"
#include "cbo/types.hpp"

namespace cbo::branin {

/// Disk feasibility region; defaults reproduce the one-feasible-minimum pattern.
struct Disk {
  double center_x1 = 2.5;
  double center_x2 = 7.5;
  double radius_sq = 50.0;
};

/// Constrained Branin-Hoo on x1 in [-5, 10], x2 in [0, 15]. Coupled and
/// noise-free: every query returns the objective and the disk label.
class BraninProblem : public Problem {
 public:
  explicit BraninProblem(Disk disk = {});

  static BoundedBox box();
  BoundedBox bounds() const override { return box(); }
  ProblemEvaluation evaluate(const LatentPoint& z, std::uint64_t seed) const override;
  const Disk& disk() const noexcept { return disk_; }

 private:
  Disk disk_;
};

struct Evaluation {
  double objective;
  bool feasible;
};

/// Standard Branin-Hoo: a (x2 - b x1^2 + c x1 - r)^2 + s (1 - t) cos(x1) + s.
double branin(double x1, double x2);

/// True iff (x1 - cx)^2 + (x2 - cy)^2 <= r^2.
bool disk_constraint(double x1, double x2, const Disk& disk = {});

/// Objective and constraint computed together, noise-free.
Evaluation coupled_evaluate(double x1, double x2, const Disk& disk = {});

/// Global minimum value of the unconstrained function (~0.397887).
double global_minimum_value();

/// The three global minimizers (-pi, 12.275), (pi, 2.275), (9.42478, 2.475).
std::array<std::array<double, 2>, 3> global_minimizers();

/// The unique minimizer inside the default disk.
std::array<double, 2> feasible_minimizer();

/// Throws ConfigError unless exactly one global minimizer lies inside `disk`
/// and it is (pi, 2.275).
void check_disk_eliminates_minima(const Disk& disk = {});

}  // namespace cbo::branin
