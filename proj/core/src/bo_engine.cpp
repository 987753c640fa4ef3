#include "cbo/bo_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "cbo/errors.hpp"
#include "cbo/random.hpp"

namespace cbo {

namespace {

// Seed streams, one per consumer, so that changing one component's draw
// count never shifts another's.
enum Stream : std::uint64_t {
  kInitDesign = 1,
  kPool = 2,
  kEvaluation = 3,
  kGp = 4,
  kConstraint = 5,
  kAcquisition = 6,
  kFallbackPoints = 7,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t index) {
  return derive_seed(derive_seed(seed, s), index);
}

ProblemEvaluation safe_evaluate(const Problem& problem, const LatentPoint& z, std::uint64_t seed) {
  try {
    ProblemEvaluation e = problem.evaluate(z, seed);
    if (e.objective && !std::isfinite(*e.objective)) return ProblemEvaluation{std::nullopt, false};
    return e;
  } catch (const std::exception&) {
    return ProblemEvaluation{std::nullopt, false};
  }
}

std::optional<double> best_feasible(const std::vector<Observation>& obs) {
  std::optional<double> best;
  for (const auto& o : obs) {
    if (!o.constraint_satisfied || !o.objective) continue;
    if (!best || *o.objective < *best) best = o.objective;
  }
  return best;
}

struct ObjectiveModel {
  std::optional<FitcModel> gp;
  bool fallback = false;
};

// GP on unit-cube inputs and standardized targets, refit from scratch.
ObjectiveModel fit_objective(const std::vector<Observation>& obs, const BoundedBox& box, const BoConfig& cfg,
                             std::uint64_t seed) {
  std::vector<const Observation*> scored;
  for (const auto& o : obs) {
    if (o.objective) scored.push_back(&o);
  }
  ObjectiveModel out;
  if (scored.empty()) return out;
  const auto n = static_cast<Eigen::Index>(scored.size());
  const auto d = static_cast<Eigen::Index>(box.dim());
  Matrix U(n, d);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    U.row(i) = box.to_unit(scored[static_cast<std::size_t>(i)]->z).transpose();
    y[i] = *scored[static_cast<std::size_t>(i)]->objective;
  }
  const double mean = y.mean();
  const double sd = n > 1 ? std::sqrt((y.array() - mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
  y = (y.array() - mean) / (sd > 1e-12 ? sd : 1.0);

  FitcModel init = initial_fitc_model(U, y, cfg.num_inducing, derive_seed(seed, 0));
  AdamConfig adam = cfg.gp_training;
  adam.seed = derive_seed(seed, 1);
  adam.minibatch_size = std::min<std::size_t>(adam.minibatch_size, static_cast<std::size_t>(n));
  try {
    out.gp = fit(init, U, y, adam);
  } catch (const Error&) {
    init.condition_on(U, y);
    out.gp = std::move(init);
    out.fallback = true;
  }
  return out;
}

struct ConstraintModel {
  std::optional<ConstraintSampler> sampler;
  double constant_probability = 1.0;
  bool fallback = false;
};

ConstraintModel fit_constraint(const std::vector<Observation>& obs, const std::vector<LabeledLatentPoint>& pool,
                               const BoundedBox& box, const BoConfig& cfg, std::uint64_t seed) {
  std::vector<LabeledLatentPoint> data;
  data.reserve(obs.size() + pool.size());
  for (const auto& p : pool) data.push_back(LabeledLatentPoint{box.to_unit(p.z), p.label});
  for (const auto& o : obs) data.push_back(LabeledLatentPoint{box.to_unit(o.z), o.constraint_satisfied ? 1 : 0});
  std::size_t positives = 0;
  for (const auto& p : data) positives += p.label == 1 ? 1 : 0;

  ConstraintModel out;
  if (positives == 0 || positives == data.size()) {
    // One class only: nothing to learn; the probability is that class.
    out.constant_probability = positives == 0 ? 0.0 : 1.0;
    return out;
  }
  BnnArchitecture arch = cfg.constraint_architecture;
  if (arch.layer_widths.empty()) arch = BnnArchitecture::single_hidden(box.dim());
  AlphaTrainConfig train = cfg.constraint_training;
  train.seed = derive_seed(seed, 0);
  if (cfg.constraint_steps > 0) {
    const std::size_t per_epoch = (data.size() + train.minibatch_size - 1) / train.minibatch_size;
    train.epochs = std::max<std::size_t>(1, (cfg.constraint_steps + per_epoch - 1) / per_epoch);
  }
  try {
    const WeightPosterior post = train_constraint(data, arch, train);
    out.sampler.emplace(post, cfg.acquisition.constraint_mc_samples, derive_seed(seed, 1));
  } catch (const Error&) {
    out.constant_probability = static_cast<double>(positives) / static_cast<double>(data.size());
    out.fallback = true;
  }
  return out;
}

BoTrace run_loop(const Problem& problem, const BoConfig& cfg, bool constrained) {
  cfg.validate();
  const BoundedBox box = problem.bounds();
  box.validate();
  const BoundedBox unit = BoundedBox::unit(box.dim());

  BoTrace trace;
  std::uint64_t eval_index = 0;
  auto record = [&](const LatentPoint& z, std::size_t iteration) {
    const LatentPoint zc = box.clamp(z);
    const ProblemEvaluation e = safe_evaluate(problem, zc, stream_seed(cfg.seed, kEvaluation, eval_index++));
    trace.observations.push_back(Observation{zc, e.objective, e.constraint_satisfied, iteration});
  };

  for (const LatentPoint& z : problem.initial_design(cfg.init_points, derive_seed(cfg.seed, kInitDesign))) {
    if (z.size() != static_cast<Eigen::Index>(box.dim())) throw DimensionError("initial design has wrong dimension");
    record(z, 0);
  }
  const std::vector<LabeledLatentPoint> pool =
      constrained ? problem.constraint_pool(derive_seed(cfg.seed, kPool)) : std::vector<LabeledLatentPoint>{};
  trace.best_feasible_per_iteration.push_back(best_feasible(trace.observations));

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    const ObjectiveModel objective = fit_objective(trace.observations, box, cfg, stream_seed(cfg.seed, kGp, t));
    trace.gp_fit_fallbacks += objective.fallback ? 1 : 0;

    std::vector<LatentPoint> batch;
    if (!objective.gp) {
      // Nothing scored yet: spread the batch uniformly.
      Rng rng(stream_seed(cfg.seed, kFallbackPoints, t));
      for (std::size_t b = 0; b < cfg.batch_size; ++b) batch.push_back(uniform_in(rng, unit));
    } else {
      ConstraintModel constraint;
      if (constrained) {
        constraint = fit_constraint(trace.observations, pool, box, cfg, stream_seed(cfg.seed, kConstraint, t));
        trace.constraint_fit_fallbacks += constraint.fallback ? 1 : 0;
      }
      const ConstraintSampler* sampler = constraint.sampler ? &*constraint.sampler : nullptr;
      const Surrogates models{&*objective.gp, sampler, constraint.constant_probability};

      // Incumbent candidates: evaluated points plus inducing points inside the box.
      const Matrix& Zu = objective.gp->inducing_locations();
      std::vector<Vector> cand;
      for (const auto& o : trace.observations) cand.push_back(box.to_unit(o.z));
      for (Eigen::Index i = 0; i < Zu.rows(); ++i) {
        const Vector zi = Zu.row(i).transpose();
        if (unit.contains(zi)) cand.push_back(zi);
      }
      Matrix C(static_cast<Eigen::Index>(cand.size()), static_cast<Eigen::Index>(box.dim()));
      for (std::size_t i = 0; i < cand.size(); ++i) C.row(static_cast<Eigen::Index>(i)) = cand[i].transpose();
      const Incumbent incumbent = select_incumbent(models, C, cfg.spec);

      AcquisitionConfig acq = cfg.acquisition;
      acq.bounds = unit;
      acq.seed = stream_seed(cfg.seed, kAcquisition, t);
      batch = kriging_believer_batch(*objective.gp, sampler, incumbent, cfg.batch_size, acq,
                                     &trace.degraded_acquisitions,
                                     KrigingBelieverOptions{cfg.kb_augment_inducing, constraint.constant_probability});
    }
    for (const LatentPoint& u : batch) record(box.from_unit(u), t);
    trace.best_feasible_per_iteration.push_back(best_feasible(trace.observations));
  }
  return trace;
}

void append_number(std::string& line, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, res.ptr);
}

}  // namespace

std::vector<LatentPoint> Problem::initial_design(std::size_t count, std::uint64_t seed) const {
  const BoundedBox box = bounds();
  Rng rng(seed);
  std::vector<LatentPoint> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) pts.push_back(uniform_in(rng, box));
  return pts;
}

void BoConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
  if (init_points == 0) throw ConfigError("init_points", "must be positive");
  if (num_inducing == 0) throw ConfigError("num_inducing", "must be positive");
  spec.validate();
  gp_training.validate();
  constraint_training.validate();
  if (!constraint_architecture.layer_widths.empty()) constraint_architecture.validate();
  acquisition.optimizer().validate();
  if (acquisition.constraint_mc_samples == 0) throw ConfigError("constraint_mc_samples", "must be at least 1");
}

AlphaTrainConfig BoConfig::default_constraint_training() {
  AlphaTrainConfig c;
  c.learning_rate = 0.005;
  c.prior_variance = 10.0;
  return c;
}

std::optional<double> BoTrace::best_feasible() const { return cbo::best_feasible(observations); }

std::vector<LatentPoint> kriging_believer_batch(const FitcModel& gp, const ConstraintSampler* constraint,
                                                const Incumbent& incumbent, std::size_t batch_size,
                                                const AcquisitionConfig& cfg, std::size_t* degraded,
                                                const KrigingBelieverOptions& options) {
  if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
  std::vector<LatentPoint> batch;
  batch.reserve(batch_size);
  FitcModel believed = gp;
  for (std::size_t b = 0; b < batch_size; ++b) {
    AcquisitionConfig step = cfg;
    step.seed = b == 0 ? cfg.seed : derive_seed(cfg.seed, b);
    const AcquisitionResult r =
        optimize_acquisition(Surrogates{&believed, constraint, options.constant_probability}, incumbent, step);
    if (degraded && r.degraded) ++*degraded;
    batch.push_back(r.z);
    if (b + 1 < batch_size) {
      const double believed_value = believed.predict_point(r.z).mean;
      believed = believed.with_observation(r.z, believed_value, options.augment_inducing);
    }
  }
  return batch;
}

BoTrace run_constrained_bo(const Problem& problem, const BoConfig& cfg) { return run_loop(problem, cfg, true); }

BoTrace run_unconstrained_bo(const Problem& problem, const BoConfig& cfg) { return run_loop(problem, cfg, false); }

BoTrace random_sampling_baseline(const Problem& problem, std::size_t budget, std::uint64_t seed) {
  if (budget == 0) throw ConfigError("budget", "must be at least 1");
  const BoundedBox box = problem.bounds();
  box.validate();
  Rng rng(derive_seed(seed, kInitDesign));
  BoTrace trace;
  std::optional<double> best;
  for (std::size_t i = 0; i < budget; ++i) {
    const LatentPoint z = uniform_in(rng, box);
    const ProblemEvaluation e = safe_evaluate(problem, z, stream_seed(seed, kEvaluation, i));
    if (e.constraint_satisfied && e.objective && (!best || *e.objective < *best)) best = e.objective;
    trace.observations.push_back(Observation{z, e.objective, e.constraint_satisfied, i});
    trace.best_feasible_per_iteration.push_back(best);
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const BoTrace& trace) {
  const std::size_t d = trace.observations.empty() ? 0 : static_cast<std::size_t>(trace.observations[0].z.size());
  std::string line = "iteration";
  for (std::size_t j = 0; j < d; ++j) line += ",z" + std::to_string(j);
  line += ",objective,constraint_satisfied\n";
  out << line;
  for (const auto& o : trace.observations) {
    line = std::to_string(o.iteration);
    for (Eigen::Index j = 0; j < o.z.size(); ++j) {
      line += ',';
      append_number(line, o.z[j]);
    }
    line += ',';
    if (o.objective) append_number(line, *o.objective);
    line += o.constraint_satisfied ? ",1\n" : ",0\n";
    out << line;
  }
}

}  // namespace cbo
