#include "cbo/optimize.hpp"

#include <cmath>
#include <deque>

#include "cbo/errors.hpp"
#include "cbo/random.hpp"

namespace cbo {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 40;

// f in unit-cube coordinates, negated for minimization.
struct UnitProblem {
  const Objective& f;
  const BoundedBox& box;
  Vector width;
  std::size_t evaluations = 0;

  double operator()(const Vector& u, Vector& g) {
    Vector gz(u.size());
    const double v = f(box.from_unit(u), gz);
    ++evaluations;
    if (gz.size() != u.size()) throw DimensionError("objective gradient has wrong size");
    g = -gz.cwiseProduct(width);
    return -v;
  }
};

Vector clamp01(const Vector& u) { return u.cwiseMax(0.0).cwiseMin(1.0); }

// Coordinates pinned at a bound with the gradient pushing outward.
Eigen::Array<bool, Eigen::Dynamic, 1> active_set(const Vector& u, const Vector& g) {
  return (u.array() <= 0.0 && g.array() > 0.0) || (u.array() >= 1.0 && g.array() < 0.0);
}

}  // namespace

void BoxOptimizerConfig::validate() const {
  if (restarts == 0) throw ConfigError("restarts", "must be at least 1");
  if (max_steps == 0) throw ConfigError("max_quasi_newton_steps", "must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("convergence_tolerance", "must be positive");
  if (history == 0) throw ConfigError("history", "must be at least 1");
}

BoxOptimum maximize_from(const Objective& f, const BoundedBox& bounds, const Vector& start,
                         const BoxOptimizerConfig& cfg, bool* failed) {
  cfg.validate();
  bounds.validate();
  if (start.size() != bounds.lo.size()) throw DimensionError("start point has wrong dimension");
  UnitProblem h{f, bounds, bounds.hi - bounds.lo};

  Vector u = clamp01(bounds.to_unit(start));
  Vector g;
  double hv = h(u, g);
  if (failed) *failed = false;
  if (!std::isfinite(hv) || !g.allFinite()) {
    if (failed) *failed = true;
    return BoxOptimum{bounds.from_unit(u), -hv, 0, h.evaluations, true};
  }

  std::deque<Vector> S, Y;
  Vector u_new, g_new;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const Vector pg = u - clamp01(u - g);
    if (pg.lpNorm<Eigen::Infinity>() < cfg.tolerance) break;

    const auto active = active_set(u, g);
    Vector q = active.select(Vector::Zero(u.size()), g);

    // Two-loop recursion on the free coordinates.
    const std::size_t m = S.size();
    std::vector<double> a(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
      rho[i] = 1.0 / Y[i].dot(S[i]);
      a[i] = rho[i] * S[i].dot(q);
      q -= a[i] * Y[i];
    }
    if (m > 0) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const double b = rho[i] * Y[i].dot(q);
      q += (a[i] - b) * S[i];
    }
    Vector d = active.select(Vector::Zero(u.size()), -q);
    if (!(d.dot(g) < 0.0)) d = active.select(Vector::Zero(u.size()), -g);

    double t = 1.0;
    if (m == 0) t = std::min(1.0, 0.1 / d.lpNorm<Eigen::Infinity>());
    bool accepted = false;
    double hv_new = hv;
    for (int k = 0; k < kMaxHalvings; ++k, t *= 0.5) {
      u_new = clamp01(u + t * d);
      const Vector delta = u_new - u;
      if (delta.lpNorm<Eigen::Infinity>() < 1e-15) break;
      hv_new = h(u_new, g_new);
      if (std::isfinite(hv_new) && g_new.allFinite() && hv_new <= hv + kArmijo * g.dot(delta)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (failed) *failed = true;
      break;
    }

    const Vector s = u_new - u;
    const Vector y = g_new - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      if (S.size() > cfg.history) {
        S.pop_front();
        Y.pop_front();
      }
    }
    const double decrease = hv - hv_new;
    u = u_new;
    g = g_new;
    hv = hv_new;
    if (decrease <= 1e-15 * (1.0 + std::abs(hv))) break;
  }
  return BoxOptimum{bounds.from_unit(u), -hv, 0, h.evaluations, false};
}

BoxOptimum maximize_in_box(const Objective& f, const BoundedBox& bounds, const BoxOptimizerConfig& cfg) {
  cfg.validate();
  bounds.validate();
  Rng rng(cfg.seed);
  BoxOptimum best;
  bool have = false;
  std::size_t failures = 0, evaluations = 0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    const Vector start = uniform_in(rng, bounds);
    bool failed = false;
    BoxOptimum run = maximize_from(f, bounds, start, cfg, &failed);
    evaluations += run.evaluations;
    failures += failed ? 1 : 0;
    if (!std::isfinite(run.value)) continue;
    if (!have || run.value > best.value) {
      best = std::move(run);
      best.best_restart = r;
      have = true;
    }
  }
  if (!have) throw NumericalError("acquisition", "objective was not finite at any start point");
  best.evaluations = evaluations;
  best.degraded = failures == cfg.restarts;
  best.z = bounds.clamp(best.z);
  return best;
}

}  // namespace cbo
