#pragma once

#include <cstdint>

#include "cbo/types.hpp"

namespace cbo {

/// Adam configuration shared by the GP and BNN trainers.
struct AdamConfig {
  double learning_rate = 0.005;
  std::size_t epochs = 400;
  std::size_t minibatch_size = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// First/second-moment state for one parameter vector.
class AdamState {
 public:
  AdamState(Eigen::Index size, const AdamConfig& cfg);

  /// Applies one descent step to `params` given the gradient of the loss.
  void step(Vector& params, const Vector& grad);

  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  std::size_t t_ = 0;
};

}  // namespace cbo
