#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cbo/bnn.hpp"
#include "cbo/branin.hpp"
#include "cbo/errors.hpp"
#include "support/oracles.hpp"

namespace cbo {
namespace {

// --- independent references -------------------------------------------------

// Single-hidden-layer forward pass with explicit loops over the documented
// flat layout (per layer: d_out x (d_in + 1), column-major, bias last).
double oracle_logit(const std::vector<double>& w, const std::vector<std::size_t>& widths, Activation act,
                    const std::vector<double>& x) {
  std::vector<double> h = x;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    std::vector<double> next(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double a = w[offset + in * out + o];  // bias column
      for (std::size_t i = 0; i < in; ++i) a += w[offset + i * out + o] * h[i];
      const bool last = l + 2 == widths.size();
      next[o] = last ? a : (act == Activation::relu ? std::max(0.0, a) : std::exp(-a * a));
    }
    offset += out * (in + 1);
    h = std::move(next);
  }
  return h[0];
}

// KL(q || N(0, v0)) - N/B sum_n E_q[log p(y_n | w)], expectation by plain Monte Carlo.
double oracle_vb_energy(const WeightPosterior& post, const std::vector<LabeledLatentPoint>& data, double v0,
                        std::size_t samples, std::uint64_t seed) {
  const std::size_t P = post.num_params();
  double kl = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const double v = std::exp(post.log_variance[static_cast<Eigen::Index>(i)]);
    const double m = post.mean[static_cast<Eigen::Index>(i)];
    kl += 0.5 * (v / v0 + m * m / v0 - 1.0 - std::log(v / v0));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double expected = 0;
  std::vector<double> w(P);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < P; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      w[i] = post.mean[ii] + std::exp(0.5 * post.log_variance[ii]) * g(rng);
    }
    for (const auto& p : data) {
      std::vector<double> x(static_cast<std::size_t>(p.z.size()));
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = p.z[static_cast<Eigen::Index>(j)];
      const double f = oracle_logit(w, post.arch.layer_widths, post.arch.hidden_activation, x);
      const double prob = 1.0 / (1.0 + std::exp(-f));
      expected += p.label == 1 ? std::log(prob) : std::log(1.0 - prob);
    }
  }
  return kl - expected / static_cast<double>(samples);
}

// --- fixtures ---------------------------------------------------------------

std::vector<LabeledLatentPoint> toy_problem(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LabeledLatentPoint> data;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledLatentPoint p;
    p.z = Vector(2);
    p.z << g(rng), g(rng);
    p.label = p.z[0] + 0.5 * p.z[1] > 0 ? 1 : 0;
    data.push_back(p);
  }
  return data;
}

std::vector<LabeledLatentPoint> disk_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u1(-5.0, 10.0), u2(0.0, 15.0);
  std::vector<LabeledLatentPoint> data;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledLatentPoint p;
    p.z = Vector(2);
    p.z << u1(rng), u2(rng);
    p.label = branin::disk_constraint(p.z[0], p.z[1]) ? 1 : 0;
    data.push_back(p);
  }
  return data;
}

double accuracy(const WeightPosterior& post, const std::vector<LabeledLatentPoint>& data) {
  Matrix Z(static_cast<Eigen::Index>(data.size()), post.arch.input_dim());
  for (std::size_t i = 0; i < data.size(); ++i) Z.row(static_cast<Eigen::Index>(i)) = data[i].z.transpose();
  const Vector p = predict_prob(post, Z, 100, 5);
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    correct += ((p[static_cast<Eigen::Index>(i)] > 0.5) == (data[i].label == 1)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double log_loss(const WeightPosterior& post, const std::vector<LabeledLatentPoint>& data) {
  Matrix Z(static_cast<Eigen::Index>(data.size()), post.arch.input_dim());
  for (std::size_t i = 0; i < data.size(); ++i) Z.row(static_cast<Eigen::Index>(i)) = data[i].z.transpose();
  const Vector p = predict_prob(post, Z, 100, 5);
  double loss = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double pi = std::clamp(p[static_cast<Eigen::Index>(i)], 1e-12, 1.0 - 1e-12);
    loss -= data[i].label == 1 ? std::log(pi) : std::log(1.0 - pi);
  }
  return loss / static_cast<double>(data.size());
}

// Posterior with moderate variances so the MC terms are not trivial.
WeightPosterior spread_posterior(const BnnArchitecture& arch, std::uint64_t seed, double var) {
  WeightPosterior post = init_posterior(arch, seed);
  post.log_variance.setConstant(std::log(var));
  return post;
}

// --- tests ------------------------------------------------------------------

TEST(BnnArchitectureTest, Validation) {
  EXPECT_THROW((BnnArchitecture{{2, 1}, Activation::relu}.validate()), ConfigError);
  EXPECT_THROW((BnnArchitecture{{2, 5, 2}, Activation::relu}.validate()), ConfigError);
  EXPECT_NO_THROW(BnnArchitecture::single_hidden(2).validate());
  EXPECT_EQ(BnnArchitecture::single_hidden(2).num_params(), 50u * 3u + 51u);
}

TEST(InitPosterior, DeterministicForSeed) {
  const auto arch = BnnArchitecture::single_hidden(2);
  const WeightPosterior a = init_posterior(arch, 17);
  const WeightPosterior b = init_posterior(arch, 17);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.log_variance, b.log_variance);
  EXPECT_NE(a.mean, init_posterior(arch, 18).mean);
}

TEST(InitPosterior, RejectsNoHiddenLayer) {
  EXPECT_THROW(init_posterior(BnnArchitecture{{3, 1}, Activation::relu}, 0), ConfigError);
}

// Output layer 50 -> 1: means should have variance 2/51.
TEST(InitPosterior, GlorotVarianceOfOutputLayer) {
  const auto arch = BnnArchitecture::single_hidden(4, 50);
  const Eigen::Index first = 50 * 5;  // hidden layer block size
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const WeightPosterior post = init_posterior(arch, seed);
    const Vector w = post.mean.segment(first, 50);  // weights only, bias excluded
    const double var = w.squaredNorm() / 50.0;
    EXPECT_NEAR(var, 2.0 / 51.0, 0.2 * 2.0 / 51.0 * 2.5) << "seed " << seed;
  }
  // pooled over re-inits the estimate tightens
  double pooled = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    pooled += init_posterior(arch, seed).mean.segment(first, 50).squaredNorm();
  }
  EXPECT_NEAR(pooled / 500.0, 2.0 / 51.0, 0.2 * 2.0 / 51.0);
  const WeightPosterior post = init_posterior(arch, 0);
  EXPECT_NEAR(post.log_variance[first], std::log(1e-6 * 2.0 / 51.0), 1e-12);
}

TEST(AlphaEnergy, FiniteOnValidInput) {
  const auto data = toy_problem(20, 1);
  const WeightPosterior post = init_posterior(BnnArchitecture::single_hidden(2, 10), 3);
  AlphaTrainConfig cfg;
  EXPECT_TRUE(std::isfinite(alpha_energy(post, data, cfg, data.size())));
}

TEST(AlphaEnergy, SmallAlphaApproachesVbOracle) {
  const auto data = toy_problem(20, 2);
  const auto arch = BnnArchitecture::single_hidden(2, 10);
  const WeightPosterior post = spread_posterior(arch, 4, 0.05);
  AlphaTrainConfig cfg;
  cfg.alpha = 0.01;
  cfg.mc_samples = 4000;
  cfg.seed = 7;
  const double bb = alpha_energy(post, data, cfg, data.size());
  const double vb = oracle_vb_energy(post, data, cfg.prior_variance, 4000, 99);
  EXPECT_LT(std::abs(bb - vb) / std::abs(vb), 0.05) << "bb-alpha " << bb << " vb " << vb;

  cfg.vb_limit = true;
  const double vb_switch = alpha_energy(post, data, cfg, data.size());
  EXPECT_LT(std::abs(vb_switch - vb) / std::abs(vb), 0.02) << "vb switch " << vb_switch << " oracle " << vb;
}

void check_energy_gradient(const BnnArchitecture& arch, AlphaTrainConfig cfg, std::size_t n_total) {
  const auto data = toy_problem(12, 5);
  const std::vector<LabeledLatentPoint> batch(data.begin(), data.begin() + 6);
  WeightPosterior post = spread_posterior(arch, 8, 0.02);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.5);
  for (Eigen::Index i = 0; i < post.log_variance.size(); ++i) post.log_variance[i] += g(rng);

  PosteriorGradient grad;
  alpha_energy(post, batch, cfg, n_total, grad);
  const Eigen::Index P = post.mean.size();
  Vector theta(2 * P);
  theta << post.mean, post.log_variance;
  auto f = [&](const Vector& t) {
    WeightPosterior q = post;
    q.mean = t.head(P);
    q.log_variance = t.tail(P);
    return alpha_energy(q, batch, cfg, n_total);  // same seed: common random numbers
  };
  int checked = 0;
  for (Eigen::Index i = 0; i < 2 * P; i += 3) {
    const double analytic = i < P ? grad.mean[i] : grad.log_variance[i - P];
    const double fd = oracle::central_difference(f, theta, i, 1e-5);
    EXPECT_LT(oracle::relative_error(analytic, fd, 1e-5), 1e-3) << "param " << i << " analytic " << analytic
                                                                << " fd " << fd;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(AlphaEnergy, GradientMatchesFiniteDifferencesGaussianRbf) {
  AlphaTrainConfig cfg;
  cfg.mc_samples = 20;
  cfg.seed = 11;
  check_energy_gradient(BnnArchitecture::single_hidden(2, 8), cfg, 12);
}

TEST(AlphaEnergy, GradientMatchesFiniteDifferencesTwoHiddenRelu) {
  AlphaTrainConfig cfg;
  cfg.mc_samples = 20;
  cfg.seed = 12;
  cfg.alpha = 1.0;
  check_energy_gradient(BnnArchitecture::two_hidden(2, 6), cfg, 100);
}

TEST(AlphaEnergy, GradientMatchesFiniteDifferencesVbLimit) {
  AlphaTrainConfig cfg;
  cfg.mc_samples = 20;
  cfg.seed = 13;
  cfg.vb_limit = true;
  check_energy_gradient(BnnArchitecture::single_hidden(2, 8, Activation::relu), cfg, 12);
}

TEST(TrainConstraint, DiskDataHeldOutAccuracy) {
  const auto train = disk_data(200, 1);
  const auto test = disk_data(200, 2);
  AlphaTrainConfig cfg;
  cfg.seed = 4;
  const WeightPosterior post = train_constraint(train, BnnArchitecture::single_hidden(2), cfg);
  EXPECT_GE(accuracy(post, test), 0.9);

  // Learned field is higher inside the disk than outside.
  double inside = 0, outside = 0;
  int n_in = 0, n_out = 0;
  Matrix grid(61 * 61, 2);
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j <= 60; ++j) grid.row(i * 61 + j) << -5.0 + 15.0 * i / 60.0, 15.0 * j / 60.0;
  const Vector p = predict_prob(post, grid, 100, 0);
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    if (branin::disk_constraint(grid(r, 0), grid(r, 1))) {
      inside += p[r];
      ++n_in;
    } else {
      outside += p[r];
      ++n_out;
    }
  }
  EXPECT_GE(inside / n_in - outside / n_out, 0.3);

  Matrix probe(2, 2);
  probe << 2.5, 7.5, -5.0, 0.0;
  const Vector pp = predict_prob(post, probe, 100, 0);
  EXPECT_GT(pp[0], pp[1]);
}

TEST(TrainConstraint, SeparableBlobs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<LabeledLatentPoint> data, test;
  for (int i = 0; i < 300; ++i) {
    LabeledLatentPoint p;
    p.label = i % 2;
    p.z = Vector(2);
    p.z << (p.label ? 2.0 : -2.0) + g(rng), (p.label ? 1.0 : -1.0) + g(rng);
    (i < 150 ? data : test).push_back(p);
  }
  AlphaTrainConfig cfg;
  cfg.epochs = 100;
  const WeightPosterior post = train_constraint(data, BnnArchitecture::single_hidden(2), cfg);
  EXPECT_GE(accuracy(post, test), 0.95);
}

TEST(TrainConstraint, HeldOutLogLossNoWorseThanInit) {
  const auto train = disk_data(150, 3);
  const auto test = disk_data(150, 4);
  AlphaTrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 2;
  AlphaTrainConfig none = cfg;
  none.epochs = 0;
  const auto arch = BnnArchitecture::single_hidden(2);
  EXPECT_LE(log_loss(train_constraint(train, arch, cfg), test), log_loss(train_constraint(train, arch, none), test));
}

TEST(TrainConstraint, ZeroEpochsReturnsInit) {
  const auto data = disk_data(40, 3);
  AlphaTrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 21;
  const auto arch = BnnArchitecture::single_hidden(2);
  const WeightPosterior post = train_constraint(data, arch, cfg);
  const WeightPosterior init = init_posterior(arch, 21);
  EXPECT_EQ(post.mean, init.mean);
  EXPECT_EQ(post.log_variance, init.log_variance);
}

TEST(TrainConstraint, BitReproducible) {
  const auto data = disk_data(60, 3);
  AlphaTrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 5;
  const auto arch = BnnArchitecture::single_hidden(2);
  const WeightPosterior a = train_constraint(data, arch, cfg);
  const WeightPosterior b = train_constraint(data, arch, cfg);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.log_variance, b.log_variance);
}

TEST(TrainConstraint, SingleClassIsDegenerate) {
  auto data = disk_data(30, 3);
  for (auto& p : data) p.label = 1;
  EXPECT_THROW(train_constraint(data, BnnArchitecture::single_hidden(2), AlphaTrainConfig{}), DegenerateDataError);
}

TEST(PredictProb, ZeroPosteriorGivesOneHalf) {
  WeightPosterior post = init_posterior(BnnArchitecture::single_hidden(3, 7), 0);
  post.mean.setZero();
  post.log_variance.setConstant(-80.0);
  const Vector p = predict_prob(post, Matrix::Random(4, 3), 10, 0);
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p[i], 0.5);
}

TEST(PredictProb, MonteCarloConvergence) {
  const auto data = disk_data(100, 9);
  AlphaTrainConfig cfg;
  cfg.epochs = 60;
  WeightPosterior post = train_constraint(data, BnnArchitecture::single_hidden(2), cfg);
  // Widen q so the MC average actually varies between draws.
  post.log_variance.array() += 6.0;
  Matrix z(1, 2);
  z << 5.0, 12.0;
  const double p1 = predict_prob(post, z, 1, 1)[0];
  const double p_big_a = predict_prob(post, z, 10000, 1)[0];
  const double p_big_b = predict_prob(post, z, 10000, 2)[0];
  EXPECT_NE(p1, p_big_a);
  EXPECT_LT(std::abs(p_big_a - p_big_b), 0.02);
}

TEST(PredictProb, BoundedDeterministicAndOrderInvariant) {
  const auto data = disk_data(60, 10);
  AlphaTrainConfig cfg;
  cfg.epochs = 20;
  const WeightPosterior post = train_constraint(data, BnnArchitecture::single_hidden(2), cfg);
  Matrix Z(5, 2);
  Z << 0, 0, 2.5, 7.5, 10, 15, -5, 15, 3, 3;
  const Vector a = predict_prob(post, Z, 50, 3);
  const Vector b = predict_prob(post, Z, 50, 3);
  EXPECT_EQ(a, b);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
  const Matrix Zr = Z.colwise().reverse();
  const Vector c = predict_prob(post, Zr, 50, 3);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(a[i], c[4 - i]);
}

TEST(ConstraintSamplerTest, InputGradientMatchesFiniteDifferences) {
  const auto data = disk_data(60, 11);
  AlphaTrainConfig cfg;
  cfg.epochs = 20;
  for (auto act : {Activation::gaussian_rbf, Activation::relu}) {
    const WeightPosterior post = train_constraint(data, BnnArchitecture::two_hidden(2, 12, act), cfg);
    const ConstraintSampler sampler(post, 30, 4);
    const Vector z = (Vector(2) << 1.3, 6.1).finished();
    Vector grad;
    const double p = sampler.probability(z, grad);
    EXPECT_DOUBLE_EQ(p, sampler.probability(z));
    auto f = [&](const Vector& q) { return sampler.probability(q); };
    for (Eigen::Index j = 0; j < 2; ++j) {
      EXPECT_LT(oracle::relative_error(grad[j], oracle::central_difference(f, z, j, 1e-6), 1e-7), 1e-4);
    }
  }
}

}  // namespace
}  // namespace cbo
