#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "cbo/bnn.hpp"
#include "cbo/optimize.hpp"
#include "cbo/sparse_gp.hpp"
#include "cbo/types.hpp"

namespace cbo {

/// Feasibility is accepted at confidence 1 - delta.
struct ProbabilisticConstraintSpec {
  double delta = 0.05;

  void validate() const;
};

struct Incumbent {
  std::optional<double> eta;
  bool feasible_found = false;
};

struct AcquisitionConfig {
  BoundedBox bounds;
  std::size_t restarts = 10;
  std::size_t max_quasi_newton_steps = 100;
  double convergence_tolerance = 1e-6;
  /// Weight draws frozen for the constraint probability during one optimization.
  std::size_t constraint_mc_samples = 50;
  std::uint64_t seed = 0;

  void validate() const;
  BoxOptimizerConfig optimizer() const;
};

/// E[max(0, eta - f)] for f ~ N(mean, sd^2) (minimization).
double expected_improvement(double mean, double sd, double eta);

/// Also returns dEI/dmean and dEI/dsd.
double expected_improvement(double mean, double sd, double eta, double& d_mean, double& d_sd);

/// EI(z) * Pr(C(z)).
double eic(double ei_value, double pr_constraint);

/// Objective and constraint surrogates as seen by the acquisition. A null
/// constraint means Pr(C) = constant_probability everywhere: 1 for
/// unconstrained search, 0 before any feasible label has been seen.
struct Surrogates {
  const FitcModel* gp = nullptr;
  const ConstraintSampler* constraint = nullptr;
  double constant_probability = 1.0;

  double probability(const Vector& z) const;
  Vector probability(const Matrix& Zq) const;
};

/// Minimum GP posterior mean over the candidate rows whose constraint
/// probability is at least 1 - delta.
Incumbent select_incumbent(const Surrogates& models, const Matrix& candidates,
                           const ProbabilisticConstraintSpec& spec);

/// Two-phase rule: Pr(C(z)) * EI(z) once a feasible incumbent exists,
/// Pr(C(z)) alone before that.
double acquisition_value(const Vector& z, const Surrogates& models, const Incumbent& incumbent);

/// Same value with its gradient in z.
double acquisition_value(const Vector& z, const Surrogates& models, const Incumbent& incumbent, Vector& grad);

struct AcquisitionResult {
  LatentPoint z;
  double value = 0;
  bool degraded = false;
};

/// Multi-start bounded L-BFGS on log(acquisition_value); the result carries
/// the plain value.
AcquisitionResult optimize_acquisition(const Surrogates& models, const Incumbent& incumbent,
                                       const AcquisitionConfig& cfg);

/// Convenience overload that freezes cfg.constraint_mc_samples weight draws
/// from `constraint` (seeded by cfg.seed) for the whole optimization.
AcquisitionResult optimize_acquisition(const FitcModel& gp, const WeightPosterior& constraint,
                                       const Incumbent& incumbent, const AcquisitionConfig& cfg);

}  // namespace cbo
