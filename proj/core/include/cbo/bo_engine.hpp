#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cbo/acquisition.hpp"
#include "cbo/adam.hpp"
#include "cbo/bnn.hpp"
#include "cbo/sparse_gp.hpp"
#include "cbo/types.hpp"

namespace cbo {

/// Result of one black-box query. The objective may be missing when the
/// query produced nothing that can be scored.
struct ProblemEvaluation {
  std::optional<double> objective;
  bool constraint_satisfied = false;
};

/// A black-box problem, minimized. Evaluations must be deterministic in
/// (z, seed); the engine hands out a fresh derived seed per query.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual BoundedBox bounds() const = 0;
  virtual ProblemEvaluation evaluate(const LatentPoint& z, std::uint64_t seed) const = 0;

  /// Points evaluated before the first iteration. Default: uniform draws.
  virtual std::vector<LatentPoint> initial_design(std::size_t count, std::uint64_t seed) const;

  /// Extra constraint labels known up front (no objective attached).
  virtual std::vector<LabeledLatentPoint> constraint_pool(std::uint64_t /*seed*/) const { return {}; }
};

struct Observation {
  LatentPoint z;
  std::optional<double> objective;
  bool constraint_satisfied = false;
  std::size_t iteration = 0;  // 0 for the initial design
};

struct BoConfig {
  std::size_t iterations = 10;
  std::size_t batch_size = 5;
  std::size_t init_points = 10;
  ProbabilisticConstraintSpec spec{};
  std::uint64_t seed = 0;

  std::size_t num_inducing = 5;
  AdamConfig gp_training{};  // lr 0.005, 400 epochs, minibatch 5
  /// Empty layer list means the single-hidden-layer default for the problem dimension.
  BnnArchitecture constraint_architecture{};
  /// Retrained every iteration on a growing set, so the budget is counted in
  /// Adam steps (constraint_steps); epochs in here are ignored unless
  /// constraint_steps is 0. The wider prior lets ten labels give confident
  /// probabilities; with unit prior variance nothing reaches 1 - delta.
  AlphaTrainConfig constraint_training = default_constraint_training();
  std::size_t constraint_steps = 1500;
  /// Only restarts, steps, tolerance and MC samples are used; bounds and seed come from the engine.
  AcquisitionConfig acquisition{};
  bool kb_augment_inducing = true;

  void validate() const;
  static AlphaTrainConfig default_constraint_training();
};

struct BoTrace {
  std::vector<Observation> observations;
  /// Best feasible objective after the initial design (entry 0) and after each iteration.
  std::vector<std::optional<double>> best_feasible_per_iteration;
  std::size_t degraded_acquisitions = 0;
  std::size_t gp_fit_fallbacks = 0;
  std::size_t constraint_fit_fallbacks = 0;

  std::optional<double> best_feasible() const;
};

struct KrigingBelieverOptions {
  /// Hallucinated points also become inducing points. Without this a FITC
  /// model with few inducing points barely lowers its variance at a
  /// hallucinated point, and the batch repeats itself.
  bool augment_inducing = true;
  double constant_probability = 1.0;
};

/// Greedy batch: after each selection the GP is conditioned on its own mean
/// at the chosen point. The hallucinated data lives only inside this call.
/// Returns points in selection order; `degraded` counts degraded selections.
std::vector<LatentPoint> kriging_believer_batch(const FitcModel& gp, const ConstraintSampler* constraint,
                                                const Incumbent& incumbent, std::size_t batch_size,
                                                const AcquisitionConfig& cfg, std::size_t* degraded = nullptr,
                                                const KrigingBelieverOptions& options = {});

BoTrace run_constrained_bo(const Problem& problem, const BoConfig& cfg);

/// Same loop with Pr(C) = 1 everywhere (plain EI). Labels are still recorded.
BoTrace run_unconstrained_bo(const Problem& problem, const BoConfig& cfg);

/// `budget` uniform points, recorded like BO observations; observation i
/// belongs to iteration i.
BoTrace random_sampling_baseline(const Problem& problem, std::size_t budget, std::uint64_t seed);

/// One row per observation: iteration, z_0..z_{d-1}, objective (empty when
/// missing), constraint label. Numbers use round-trip precision.
void write_trace_csv(std::ostream& out, const BoTrace& trace);

}  // namespace cbo
