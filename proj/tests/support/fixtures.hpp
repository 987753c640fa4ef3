#pragma once

// Small hand-built models shared by the acquisition and engine tests.

#include <cmath>
#include <random>

#include "cbo/bnn.hpp"
#include "cbo/sparse_gp.hpp"

namespace cbo::fixture {

/// ReLU network whose logit is exactly `slope * (z[axis] - offset)` on
/// z[axis] > offset - 50, with variances small enough to be deterministic.
inline WeightPosterior linear_logit_posterior(std::size_t dim, std::size_t axis = 0, double slope = 1.0,
                                              double offset = 0.0) {
  WeightPosterior post = init_posterior(BnnArchitecture{{dim, 1, 1}, Activation::relu}, 0);
  post.mean.setZero();
  const auto d = static_cast<Eigen::Index>(dim);
  // hidden block: 1 x (d + 1); output block: 1 x 2
  post.mean[static_cast<Eigen::Index>(axis)] = slope;
  post.mean[d] = 50.0 * slope - slope * offset;  // keeps the unit in its linear regime
  post.mean[d + 1] = 1.0;
  post.mean[d + 2] = -50.0 * slope;
  post.log_variance.setConstant(-200.0);
  return post;
}

/// logit(p)
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// GP conditioned on (X, y) with fixed, well-behaved hyperparameters and
/// inducing points at the training inputs.
inline FitcModel conditioned_gp(const Matrix& X, const Vector& y, double lengthscale = 0.3, double s2 = 1.0,
                                double noise = 1e-4) {
  KernelHyperparams hp{Vector::Constant(X.cols(), std::log(lengthscale)), std::log(s2)};
  FitcModel gp(hp, X, std::log(noise));
  gp.condition_on(X, y);
  return gp;
}

/// Random smooth regression data on [0,1]^d.
inline void random_data(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, Matrix& X, Vector& y) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  X.resize(n, d);
  y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = u(rng);
    y[i] = std::sin(6.0 * X(i, 0)) + X.row(i).squaredNorm();
  }
}

}  // namespace cbo::fixture
