#include "cbo/acquisition.hpp"

#include <cmath>
#include <numbers>

#include "cbo/errors.hpp"
#include "cbo/random.hpp"

namespace cbo {

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

constexpr double kLogFloor = 1e-300;

}  // namespace

void ProbabilisticConstraintSpec::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
}

void AcquisitionConfig::validate() const {
  bounds.validate();
  optimizer().validate();
  if (constraint_mc_samples == 0) throw ConfigError("constraint_mc_samples", "must be at least 1");
}

BoxOptimizerConfig AcquisitionConfig::optimizer() const {
  BoxOptimizerConfig o;
  o.restarts = restarts;
  o.max_steps = max_quasi_newton_steps;
  o.tolerance = convergence_tolerance;
  o.seed = seed;
  return o;
}

double expected_improvement(double mean, double sd, double eta, double& d_mean, double& d_sd) {
  if (!(sd >= 0.0)) throw ConfigError("sd", "standard deviation must be non-negative");
  const double diff = eta - mean;
  if (sd == 0.0) {
    d_sd = 0.0;
    d_mean = diff > 0.0 ? -1.0 : 0.0;
    return std::max(0.0, diff);
  }
  const double gamma = diff / sd;
  const double cdf = normal_cdf(gamma);
  const double pdf = normal_pdf(gamma);
  d_mean = -cdf;
  d_sd = pdf;
  return std::max(0.0, diff * cdf + sd * pdf);
}

double expected_improvement(double mean, double sd, double eta) {
  double dm = 0, ds = 0;
  return expected_improvement(mean, sd, eta, dm, ds);
}

double eic(double ei_value, double pr_constraint) { return ei_value * pr_constraint; }

double Surrogates::probability(const Vector& z) const {
  return constraint ? constraint->probability(z) : constant_probability;
}

Vector Surrogates::probability(const Matrix& Zq) const {
  return constraint ? constraint->probability(Zq) : Vector::Constant(Zq.rows(), constant_probability);
}

Incumbent select_incumbent(const Surrogates& models, const Matrix& candidates,
                           const ProbabilisticConstraintSpec& spec) {
  spec.validate();
  if (models.gp == nullptr) throw ConfigError("gp", "objective model required");
  if (candidates.rows() == 0) throw ConfigError("candidates", "need at least one candidate");
  const Vector pr = models.probability(candidates);
  const Vector mu = models.gp->predict(candidates).mean;
  Incumbent inc;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    if (pr[i] < 1.0 - spec.delta) continue;
    if (!inc.eta || mu[i] < *inc.eta) inc.eta = mu[i];
  }
  inc.feasible_found = inc.eta.has_value();
  return inc;
}

double acquisition_value(const Vector& z, const Surrogates& models, const Incumbent& incumbent) {
  if (!incumbent.feasible_found) return models.probability(z);
  const PointPrediction p = models.gp->predict_point(z);
  return eic(expected_improvement(p.mean, std::sqrt(std::max(p.variance, 0.0)), *incumbent.eta),
             models.probability(z));
}

double acquisition_value(const Vector& z, const Surrogates& models, const Incumbent& incumbent, Vector& grad) {
  Vector gpr;
  double pr = models.constant_probability;
  if (models.constraint) {
    pr = models.constraint->probability(z, gpr);
  } else {
    gpr = Vector::Zero(z.size());
  }
  if (!incumbent.feasible_found) {
    grad = gpr;
    return pr;
  }
  const PointPrediction p = models.gp->predict_point(z);
  const double sd = std::sqrt(std::max(p.variance, 0.0));
  double d_mean = 0, d_sd = 0;
  const double ei = expected_improvement(p.mean, sd, *incumbent.eta, d_mean, d_sd);
  Vector gei = d_mean * p.mean_grad;
  if (sd > 0.0) gei += d_sd * p.variance_grad / (2.0 * sd);
  grad = pr * gei + ei * gpr;
  return eic(ei, pr);
}

AcquisitionResult optimize_acquisition(const Surrogates& models, const Incumbent& incumbent,
                                       const AcquisitionConfig& cfg) {
  cfg.validate();
  if (models.gp == nullptr) throw ConfigError("gp", "objective model required");
  if (incumbent.feasible_found != incumbent.eta.has_value()) {
    throw ConfigError("incumbent", "eta must be present exactly when a feasible point was found");
  }
  // The search runs on log(value): same maximizer, but the gradient survives
  // where a saturated classifier makes the value itself flat.
  const Objective f = [&](const Vector& z, Vector& g) {
    const double v = acquisition_value(z, models, incumbent, g);
    if (!(v > kLogFloor)) {
      g.setZero();
      return std::log(kLogFloor);
    }
    g /= v;
    return std::log(v);
  };
  const BoxOptimum best = maximize_in_box(f, cfg.bounds, cfg.optimizer());
  return AcquisitionResult{best.z, acquisition_value(best.z, models, incumbent), best.degraded};
}

AcquisitionResult optimize_acquisition(const FitcModel& gp, const WeightPosterior& constraint,
                                       const Incumbent& incumbent, const AcquisitionConfig& cfg) {
  const ConstraintSampler sampler(constraint, cfg.constraint_mc_samples, derive_seed(cfg.seed, 7));
  return optimize_acquisition(Surrogates{&gp, &sampler}, incumbent, cfg);
}

}  // namespace cbo
