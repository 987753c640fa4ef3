#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cbo/types.hpp"

namespace cbo {

enum class Activation { gaussian_rbf, relu };

/// Fully connected classifier: input d -> hidden ... -> 1 logistic output.
struct BnnArchitecture {
  std::vector<std::size_t> layer_widths;  // includes input and output widths
  Activation hidden_activation = Activation::gaussian_rbf;

  /// One hidden layer of 50 Gaussian units (toy-problem configuration).
  static BnnArchitecture single_hidden(std::size_t input_dim, std::size_t width = 50,
                                       Activation act = Activation::gaussian_rbf);
  /// Two hidden ReLU layers of 100 units (latent-space configuration).
  static BnnArchitecture two_hidden(std::size_t input_dim, std::size_t width = 100,
                                    Activation act = Activation::relu);

  std::size_t input_dim() const { return layer_widths.empty() ? 0 : layer_widths.front(); }
  std::size_t num_hidden_layers() const { return layer_widths.size() < 2 ? 0 : layer_widths.size() - 2; }
  /// Weights plus biases over all layers.
  std::size_t num_params() const;
  /// Throws ConfigError unless there is at least one hidden layer and the output width is 1.
  void validate() const;
};

/// Factorized Gaussian q over all network weights (biases included).
///
/// Layer l occupies a contiguous block holding a d_out x (d_in + 1) matrix
/// in column-major order; the last column is the bias. Inputs are
/// standardized as (z - input_shift) / input_scale before the first layer.
struct WeightPosterior {
  BnnArchitecture arch;
  Vector mean;
  Vector log_variance;
  Vector input_shift;
  Vector input_scale;

  std::size_t num_params() const { return static_cast<std::size_t>(mean.size()); }
  void validate() const;
};

struct LabeledLatentPoint {
  LatentPoint z;
  int label = 0;  // 1 = constraint satisfied
};

struct AlphaTrainConfig {
  double alpha = 0.5;
  std::size_t mc_samples = 50;
  std::size_t minibatch_size = 10;
  // Run to convergence on small data the energy prefers q close to the
  // prior and the classifier flattens; this budget stops well before that.
  double learning_rate = 0.001;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  double prior_variance = 1.0;
  /// Replace the BB-alpha energy by its alpha -> 0 limit (mean-field VB).
  bool vb_limit = false;

  /// Latent-space configuration: minibatch 1000, 5 epochs, learning rate 5e-4.
  static AlphaTrainConfig latent_space();

  void validate() const;
};

/// Means drawn from N(0, 2 / (d_in + d_out)) per layer; log-variances set to
/// log(1e-6 * 2 / (d_in + d_out)). Identity input scaling.
WeightPosterior init_posterior(const BnnArchitecture& arch, std::uint64_t seed);

struct PosteriorGradient {
  Vector mean;
  Vector log_variance;
};

/// Black-box alpha-divergence energy of q on a minibatch, Monte Carlo
/// estimated with cfg.mc_samples reparameterized draws seeded by cfg.seed
/// (fixed seed = common random numbers). The data term is rescaled by
/// n_total / batch size. Throws NumericalError if the estimate is not finite.
double alpha_energy(const WeightPosterior& post, std::span<const LabeledLatentPoint> batch,
                    const AlphaTrainConfig& cfg, std::size_t n_total);

double alpha_energy(const WeightPosterior& post, std::span<const LabeledLatentPoint> batch,
                    const AlphaTrainConfig& cfg, std::size_t n_total, PosteriorGradient& grad);

/// Adam on the alpha energy. Inputs are standardized from `data` and the
/// transform is stored in the returned posterior. Throws DegenerateDataError
/// when only one class is present and TrainingDivergedError on a non-finite energy.
WeightPosterior train_constraint(std::span<const LabeledLatentPoint> data, const BnnArchitecture& arch,
                                 const AlphaTrainConfig& cfg);

/// Frozen set of weight draws from q. Evaluating through one sampler gives a
/// deterministic, differentiable probability surface.
class ConstraintSampler {
 public:
  ConstraintSampler(const WeightPosterior& post, std::size_t mc_samples, std::uint64_t seed);

  std::size_t dim() const { return static_cast<std::size_t>(shift_.size()); }
  std::size_t num_samples() const { return static_cast<std::size_t>(weights_.cols()); }

  /// Mean over draws of the logistic network output.
  double probability(const Vector& z) const;
  double probability(const Vector& z, Vector& grad) const;
  Vector probability(const Matrix& Zq) const;

 private:
  BnnArchitecture arch_;
  Matrix weights_;  // num_params x samples
  Vector shift_;
  Vector scale_;
};

/// Pr(C(z)) for each row of Zq: mean logistic output over mc_samples draws.
Vector predict_prob(const WeightPosterior& post, const Matrix& Zq, std::size_t mc_samples, std::uint64_t seed);

}  // namespace cbo
