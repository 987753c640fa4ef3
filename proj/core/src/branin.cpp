#include "cbo/branin.hpp"

#include <cmath>
#include <numbers>

#include "cbo/errors.hpp"

namespace cbo::branin {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kA = 1.0;
constexpr double kB = 5.1 / (4.0 * kPi * kPi);
constexpr double kC = 5.0 / kPi;
constexpr double kR = 6.0;
constexpr double kS = 10.0;
constexpr double kT = 1.0 / (8.0 * kPi);
}  // namespace

BraninProblem::BraninProblem(Disk disk) : disk_(disk) { check_disk_eliminates_minima(disk_); }

BoundedBox BraninProblem::box() {
  Vector lo(2), hi(2);
  lo << -5.0, 0.0;
  hi << 10.0, 15.0;
  return BoundedBox(lo, hi);
}

ProblemEvaluation BraninProblem::evaluate(const LatentPoint& z, std::uint64_t /*seed*/) const {
  if (z.size() != 2) throw DimensionError("Branin takes a 2-d point");
  const Evaluation e = coupled_evaluate(z[0], z[1], disk_);
  return ProblemEvaluation{e.objective, e.feasible};
}

double branin(double x1, double x2) {
  const double inner = x2 - kB * x1 * x1 + kC * x1 - kR;
  return kA * inner * inner + kS * (1.0 - kT) * std::cos(x1) + kS;
}

bool disk_constraint(double x1, double x2, const Disk& disk) {
  const double dx = x1 - disk.center_x1;
  const double dy = x2 - disk.center_x2;
  return dx * dx + dy * dy <= disk.radius_sq;
}

Evaluation coupled_evaluate(double x1, double x2, const Disk& disk) {
  return Evaluation{branin(x1, x2), disk_constraint(x1, x2, disk)};
}

double global_minimum_value() { return branin(kPi, 2.275); }

std::array<std::array<double, 2>, 3> global_minimizers() {
  return {{{-kPi, 12.275}, {kPi, 2.275}, {9.42478, 2.475}}};
}

std::array<double, 2> feasible_minimizer() { return {kPi, 2.275}; }

void check_disk_eliminates_minima(const Disk& disk) {
  int feasible = 0;
  for (const auto& m : global_minimizers()) feasible += disk_constraint(m[0], m[1], disk) ? 1 : 0;
  const auto f = feasible_minimizer();
  if (feasible != 1 || !disk_constraint(f[0], f[1], disk)) {
    throw ConfigError("disk", "disk must keep exactly one global minimum, (pi, 2.275), feasible");
  }
}

}  // namespace cbo::branin
