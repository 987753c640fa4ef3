#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "cbo/adam.hpp"
#include "cbo/types.hpp"

namespace cbo {

/// ARD exponentiated-quadratic kernel parameters, stored in log space.
struct KernelHyperparams {
  Vector log_lengthscales;         // one per input dimension
  double log_signal_variance = 0;  // log s^2

  std::size_t dim() const noexcept { return static_cast<std::size_t>(log_lengthscales.size()); }
  /// Throws ConfigError unless every exp(field) is finite and positive.
  void validate() const;
};

/// k(x, x') = s^2 exp(-1/2 sum_j (x_j - x'_j)^2 / l_j^2), evaluated for every row pair.
Matrix ard_kernel(const Matrix& X, const Matrix& X2, const KernelHyperparams& hp);

struct GpPrediction {
  Vector mean;
  Vector latent_variance;  // variance of f, excludes observation noise
  double noise_variance = 0;
};

/// Posterior mean/variance at one point together with their gradients in z.
struct PointPrediction {
  double mean = 0;
  double variance = 0;
  Vector mean_grad;
  Vector variance_grad;
};

/// Gradient of the FITC negative log marginal likelihood.
struct FitcGradient {
  Vector log_lengthscales;
  double log_signal_variance = 0;
  double log_noise_variance = 0;
  Matrix inducing_locations;  // M x d
};

/// Sparse GP regression model under the FITC approximation.
///
/// Parameters can be changed freely; any change drops the cached factorization,
/// and predictions then throw StaleStateError until `condition_on` (or `fit`)
/// rebuilds it. A conditioned model is immutable in practice and safe to share
/// between concurrent readers.
class FitcModel {
 public:
  static constexpr double kDefaultJitter = 1e-5;

  FitcModel(KernelHyperparams kernel, Matrix inducing_locations, double log_noise_variance,
            double jitter = kDefaultJitter);

  const KernelHyperparams& kernel() const noexcept { return kernel_; }
  const Matrix& inducing_locations() const noexcept { return inducing_; }
  double log_noise_variance() const noexcept { return log_noise_variance_; }
  double noise_variance() const;
  double jitter() const noexcept { return jitter_; }
  std::size_t dim() const noexcept { return kernel_.dim(); }
  std::size_t num_inducing() const noexcept { return static_cast<std::size_t>(inducing_.rows()); }

  void set_kernel(KernelHyperparams kernel);
  void set_inducing_locations(Matrix inducing);
  void set_log_noise_variance(double value);

  /// Stores (X, y) and builds the predictive factorization.
  void condition_on(Matrix X, Vector y);
  /// Copy of this model with one extra (z, y) observation, refactorized.
  /// With `add_inducing`, z also joins the inducing set unless it already
  /// (nearly) coincides with an inducing point.
  FitcModel with_observation(const Vector& z, double y, bool add_inducing = false) const;

  bool is_factorized() const noexcept { return static_cast<bool>(cache_); }
  const Matrix& train_inputs() const noexcept { return X_; }
  const Vector& train_targets() const noexcept { return y_; }

  GpPrediction predict(const Matrix& Zq) const;
  PointPrediction predict_point(const Vector& z) const;

 private:
  struct Factorization;

  void validate() const;
  void invalidate() noexcept { cache_.reset(); }
  const Factorization& factorization() const;

  KernelHyperparams kernel_;
  Matrix inducing_;
  double log_noise_variance_;
  double jitter_;
  Matrix X_;
  Vector y_;
  std::shared_ptr<const Factorization> cache_;
};

/// FITC negative log marginal likelihood of (X, y) under the model parameters.
/// Throws NumericalError naming the matrix when a factorization fails.
double fitc_negative_log_marginal(const FitcModel& model, const Matrix& X, const Vector& y);

/// Same value as above, and fills `grad` with derivatives w.r.t. every
/// log-hyperparameter and the inducing locations.
double fitc_negative_log_marginal(const FitcModel& model, const Matrix& X, const Vector& y,
                                  FitcGradient& grad);

struct GpFitOptions {
  bool optimize_inducing = true;
  bool optimize_noise = true;
};

/// Minibatch Adam on the FITC objective. The returned model is conditioned on
/// (X, y) and is the epoch checkpoint with the lowest full-data objective
/// (the initial parameters included), so it never scores worse than `model`.
/// Throws TrainingDivergedError when the loss becomes non-finite.
FitcModel fit(const FitcModel& model, const Matrix& X, const Vector& y, const AdamConfig& cfg,
              const GpFitOptions& options = {});

/// Data-driven starting point: lengthscales from per-dimension spread,
/// signal variance from var(y), inducing points by uniform subsampling.
FitcModel initial_fitc_model(const Matrix& X, const Vector& y, std::size_t num_inducing,
                             std::uint64_t seed, double jitter = FitcModel::kDefaultJitter);

GpPrediction predict(const FitcModel& model, const Matrix& Zq);

}  // namespace cbo
