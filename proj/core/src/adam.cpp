#include "cbo/adam.hpp"

#include <cmath>

#include "cbo/errors.hpp"

namespace cbo {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (minibatch_size == 0) throw ConfigError("minibatch_size", "must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
}

AdamState::AdamState(Eigen::Index size, const AdamConfig& cfg)
    : cfg_(cfg), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void AdamState::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate * std::sqrt(bc2) / bc1;
  params.array() -= lr * m_.array() / (v_.array().sqrt() + cfg_.epsilon);
}

}  // namespace cbo
