#include "cbo/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cbo/adam.hpp"
#include "cbo/errors.hpp"
#include "cbo/random.hpp"

namespace cbo {

namespace {

struct Layer {
  Eigen::Index in;
  Eigen::Index out;
  Eigen::Index offset;
  Eigen::Index size() const { return out * (in + 1); }
};

std::vector<Layer> layers_of(const BnnArchitecture& arch) {
  std::vector<Layer> layers;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_widths.size(); ++l) {
    Layer layer{static_cast<Eigen::Index>(arch.layer_widths[l]), static_cast<Eigen::Index>(arch.layer_widths[l + 1]),
                offset};
    offset += layer.size();
    layers.push_back(layer);
  }
  return layers;
}

using ConstMap = Eigen::Map<const Matrix>;

// Per-draw workspace. Buffers are reused across calls of the same shape.
struct ForwardCache {
  std::vector<Matrix> hidden;  // output of each hidden layer, out x B
  std::vector<Matrix> pre;     // pre-activation of each layer, out x B
  Matrix G, GH;                // backward scratch
};

// Eigen's blocked GEMM has a large fixed cost for the tiny shapes of the
// toy problems; fall back to coefficient-wise products there.
template <typename Dst, typename Lhs, typename Rhs>
void multiply(Dst& dst, const Lhs& lhs, const Rhs& rhs) {
  if (lhs.rows() * lhs.cols() * rhs.cols() < 32768) {
    dst.noalias() = lhs.lazyProduct(rhs);
  } else {
    dst.noalias() = lhs * rhs;
  }
}

template <typename Dst, typename Lhs, typename Rhs>
void multiply_add(Dst& dst, const Lhs& lhs, const Rhs& rhs) {
  if (lhs.rows() * lhs.cols() * rhs.cols() < 32768) {
    dst.noalias() += lhs.lazyProduct(rhs);
  } else {
    dst.noalias() += lhs * rhs;
  }
}

// X is d x B (already standardized). Returns the B output logits as a row of cache.pre.back().
const Matrix& forward(const std::vector<Layer>& layers, Activation act, const double* w, const Matrix& X,
                      ForwardCache& cache) {
  cache.hidden.resize(layers.size() - 1);
  cache.pre.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    ConstMap W(w + L.offset, L.out, L.in + 1);
    const Matrix& H = l == 0 ? X : cache.hidden[l - 1];
    Matrix& A = cache.pre[l];
    A.resize(L.out, H.cols());
    multiply(A, W.leftCols(L.in), H);
    A.colwise() += W.col(L.in);
    if (l + 1 == layers.size()) break;
    Matrix& Hn = cache.hidden[l];
    if (act == Activation::relu) {
      Hn = A.cwiseMax(0.0);
    } else {
      Hn = (-A.array().square()).exp().matrix();
    }
  }
  return cache.pre.back();
}

// Accumulates d(sum_b df_b * f_b)/dw into gw (if given); writes input gradients (d x B) if gx is given.
void backward(const std::vector<Layer>& layers, Activation act, const double* w, const Matrix& X,
              ForwardCache& cache, const Eigen::Ref<const Vector>& df, double* gw, Matrix* gx) {
  Matrix& G = cache.G;
  Matrix& GH = cache.GH;
  G = df.transpose();  // out x B
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& L = layers[li];
    const Matrix& H = li == 0 ? X : cache.hidden[li - 1];
    if (gw != nullptr) {
      Eigen::Map<Matrix> GW(gw + L.offset, L.out, L.in + 1);
      auto GWl = GW.leftCols(L.in);
      multiply_add(GWl, G, H.transpose());
      GW.col(L.in) += G.rowwise().sum();
    }
    if (li == 0 && gx == nullptr) break;
    ConstMap W(w + L.offset, L.out, L.in + 1);
    GH.resize(L.in, G.cols());
    multiply(GH, W.leftCols(L.in).transpose(), G);
    if (li == 0) {
      *gx = GH;
      break;
    }
    const Matrix& A = cache.pre[li - 1];
    if (act == Activation::relu) {
      G = GH.cwiseProduct((A.array() > 0.0).cast<double>().matrix());
    } else {
      G = GH.cwiseProduct((-2.0 * A.array() * (-A.array().square()).exp()).matrix());
    }
  }
}

double log_sigmoid(double f) { return f >= 0 ? -std::log1p(std::exp(-f)) : f - std::log1p(std::exp(f)); }
double sigmoid(double f) {
  if (f >= 0) return 1.0 / (1.0 + std::exp(-f));
  const double e = std::exp(f);
  return e / (1.0 + e);
}

Matrix standardized_inputs(const WeightPosterior& post, std::span<const LabeledLatentPoint> batch) {
  const auto d = static_cast<Eigen::Index>(post.arch.input_dim());
  Matrix X(d, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].z.size() != d) throw DimensionError("labeled point has wrong dimension");
    X.col(static_cast<Eigen::Index>(i)) =
        ((batch[i].z - post.input_shift).array() / post.input_scale.array()).matrix();
  }
  return X;
}

// Energy with explicit standard-normal noise eps (P x K): fixing eps gives
// common random numbers across evaluations.
double energy_with_noise(const WeightPosterior& post, std::span<const LabeledLatentPoint> batch,
                         const AlphaTrainConfig& cfg, std::size_t n_total, const Matrix& eps,
                         PosteriorGradient* grad) {
  if (batch.empty()) throw ConfigError("batch", "empty minibatch");
  if (n_total < batch.size()) throw ConfigError("n_total", "smaller than the minibatch");
  const auto layers = layers_of(post.arch);
  const Activation act = post.arch.hidden_activation;
  const Eigen::Index P = post.mean.size();
  const Eigen::Index K = eps.cols();
  const auto B = static_cast<Eigen::Index>(batch.size());
  const double N = static_cast<double>(n_total);
  const double v0 = cfg.prior_variance;
  const double alpha = cfg.alpha;
  const double a = alpha / N;

  const Vector& m = post.mean;
  const Vector v = post.log_variance.array().exp().matrix();
  const Vector u = v / v0;

  // Sampling distribution: q itself (VB) or the cavity q^{\alpha}.
  Vector sm, sv;
  double energy = 0;
  Vector g_m_global = Vector::Zero(P), g_logv_global = Vector::Zero(P);
  if (cfg.vb_limit) {
    sm = m;
    sv = v;
    // KL(q || p)
    energy += 0.5 * (u.array() + m.array().square() / v0 - 1.0 - u.array().log()).sum();
    g_m_global = m / v0;
    g_logv_global = 0.5 * (u.array() - 1.0).matrix();
  } else {
    const Vector D = ((1.0 - a) + a * u.array()).matrix();
    sv = v.cwiseQuotient(D);
    sm = ((1.0 - a) * m.array() / D.array()).matrix();
    // Closed-form log-partition terms of the energy, arranged to avoid cancellation:
    // -1/2 log u + log1p(a (u - 1)) / (2a) + m^2 / (2 v0 (1 + c u)), c = a / (1 - a).
    const double c = a / (1.0 - a);
    const Eigen::ArrayXd cu1 = 1.0 + c * u.array();
    energy += (-0.5 * u.array().log() + (a * (u.array() - 1.0)).log1p() / (2.0 * a) +
               m.array().square() / (2.0 * v0 * cu1))
                  .sum();
    g_m_global = (m.array() / (v0 * cu1)).matrix();
    const Eigen::ArrayXd dG_du = -0.5 / u.array() + 0.5 / (1.0 + a * (u.array() - 1.0)) -
                                 m.array().square() / (2.0 * v0) * c / cu1.square();
    g_logv_global = (u.array() * dG_du).matrix();
  }
  const Vector ssd = sv.array().sqrt().matrix();

  const Matrix X = standardized_inputs(post, batch);
  Vector y(B);
  for (Eigen::Index i = 0; i < B; ++i) y[i] = batch[static_cast<std::size_t>(i)].label;

  // Log-likelihoods ell(n, k); forward caches are kept for the gradient pass.
  Matrix ell(B, K);
  Matrix logits(B, K);
  std::vector<ForwardCache> caches(grad != nullptr ? static_cast<std::size_t>(K) : 1);
  Matrix Wk(P, K);
  Wk = eps;
  Wk.array().colwise() *= ssd.array();
  Wk.colwise() += sm;
  for (Eigen::Index k = 0; k < K; ++k) {
    ForwardCache& cache = caches[grad != nullptr ? static_cast<std::size_t>(k) : 0];
    logits.col(k) = forward(layers, act, Wk.col(k).data(), X, cache).row(0).transpose();
    for (Eigen::Index i = 0; i < B; ++i) {
      ell(i, k) = y[i] > 0.5 ? log_sigmoid(logits(i, k)) : log_sigmoid(-logits(i, k));
    }
  }

  const double scale = N / static_cast<double>(B);
  Matrix r(B, K);  // d(data term)/d ell, up to the -scale factor
  double data = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    if (cfg.vb_limit) {
      data += ell.row(i).mean();
      r.row(i).setConstant(1.0 / static_cast<double>(K));
    } else {
      const Eigen::ArrayXd s = alpha * ell.row(i).transpose().array();
      const double mx = s.maxCoeff();
      const Eigen::ArrayXd e = (s - mx).exp();
      const double sum = e.sum();
      data += (mx + std::log(sum) - std::log(static_cast<double>(K))) / alpha;
      r.row(i) = (e / sum).transpose();
    }
  }
  energy -= scale * data;
  if (!std::isfinite(energy)) throw NumericalError("alpha_energy", "energy estimate is not finite");
  if (grad == nullptr) return energy;

  // Reparameterized gradients w.r.t. the sampling mean and std.
  Matrix GW = Matrix::Zero(P, K);
  Vector df(B);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index i = 0; i < B; ++i) df[i] = -scale * r(i, k) * (y[i] - sigmoid(logits(i, k)));
    backward(layers, act, Wk.col(k).data(), X, caches[static_cast<std::size_t>(k)], df, GW.col(k).data(),
             nullptr);
  }
  const Vector g_sm = GW.rowwise().sum();
  const Vector g_ssd = GW.cwiseProduct(eps).rowwise().sum();

  grad->mean.resize(P);
  grad->log_variance.resize(P);
  if (cfg.vb_limit) {
    grad->mean = g_m_global + g_sm;
    grad->log_variance = g_logv_global + (0.5 * ssd.array() * g_ssd.array()).matrix();
  } else {
    const Eigen::ArrayXd D = (1.0 - a) + a * u.array();
    const Eigen::ArrayXd dsm_dm = (1.0 - a) / D;
    const Eigen::ArrayXd dsm_dlogv = -(1.0 - a) * m.array() * a * u.array() / D.square();
    const Eigen::ArrayXd dsv_dlogv = v.array() * (1.0 - a) / D.square();
    const Eigen::ArrayXd dssd_dlogv = dsv_dlogv / (2.0 * ssd.array());
    grad->mean = g_m_global + (g_sm.array() * dsm_dm).matrix();
    grad->log_variance = g_logv_global + (g_sm.array() * dsm_dlogv + g_ssd.array() * dssd_dlogv).matrix();
  }
  return energy;
}

}  // namespace

BnnArchitecture BnnArchitecture::single_hidden(std::size_t input_dim, std::size_t width, Activation act) {
  return BnnArchitecture{{input_dim, width, 1}, act};
}

BnnArchitecture BnnArchitecture::two_hidden(std::size_t input_dim, std::size_t width, Activation act) {
  return BnnArchitecture{{input_dim, width, width, 1}, act};
}

std::size_t BnnArchitecture::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) n += layer_widths[l + 1] * (layer_widths[l] + 1);
  return n;
}

void BnnArchitecture::validate() const {
  if (layer_widths.size() < 3) throw ConfigError("layer_widths", "need input, at least one hidden layer, and output");
  if (layer_widths.back() != 1) throw ConfigError("layer_widths", "final width must be 1");
  for (std::size_t wdt : layer_widths) {
    if (wdt == 0) throw ConfigError("layer_widths", "widths must be positive");
  }
}

void WeightPosterior::validate() const {
  arch.validate();
  const auto p = static_cast<Eigen::Index>(arch.num_params());
  if (mean.size() != p || log_variance.size() != p) throw DimensionError("posterior size does not match architecture");
  const auto d = static_cast<Eigen::Index>(arch.input_dim());
  if (input_shift.size() != d || input_scale.size() != d) throw DimensionError("input scaling has wrong dimension");
  if (!log_variance.array().exp().allFinite() || (log_variance.array().exp() <= 0.0).any()) {
    throw ConfigError("log_variance", "variances must be finite and positive");
  }
  if ((input_scale.array() <= 0.0).any()) throw ConfigError("input_scale", "must be positive");
}

AlphaTrainConfig AlphaTrainConfig::latent_space() {
  AlphaTrainConfig cfg;
  cfg.minibatch_size = 1000;
  cfg.epochs = 5;
  cfg.learning_rate = 0.0005;
  return cfg;
}

void AlphaTrainConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must lie in (0, 1]");
  if (mc_samples == 0) throw ConfigError("mc_samples", "must be at least 1");
  if (minibatch_size == 0) throw ConfigError("minibatch_size", "must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(prior_variance > 0.0)) throw ConfigError("prior_variance", "must be positive");
}

WeightPosterior init_posterior(const BnnArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  WeightPosterior post;
  post.arch = arch;
  const auto P = static_cast<Eigen::Index>(arch.num_params());
  post.mean.resize(P);
  post.log_variance.resize(P);
  Rng rng(seed);
  for (const Layer& L : layers_of(arch)) {
    const double var = 2.0 / static_cast<double>(L.in + L.out);
    post.mean.segment(L.offset, L.size()) = std::sqrt(var) * standard_normal(rng, L.size(), 1);
    post.log_variance.segment(L.offset, L.size()).setConstant(std::log(1e-6 * var));
  }
  const auto d = static_cast<Eigen::Index>(arch.input_dim());
  post.input_shift = Vector::Zero(d);
  post.input_scale = Vector::Ones(d);
  return post;
}

double alpha_energy(const WeightPosterior& post, std::span<const LabeledLatentPoint> batch,
                    const AlphaTrainConfig& cfg, std::size_t n_total) {
  cfg.validate();
  post.validate();
  Rng rng(cfg.seed);
  const Matrix eps = standard_normal(rng, post.mean.size(), static_cast<Eigen::Index>(cfg.mc_samples));
  return energy_with_noise(post, batch, cfg, n_total, eps, nullptr);
}

double alpha_energy(const WeightPosterior& post, std::span<const LabeledLatentPoint> batch,
                    const AlphaTrainConfig& cfg, std::size_t n_total, PosteriorGradient& grad) {
  cfg.validate();
  post.validate();
  Rng rng(cfg.seed);
  const Matrix eps = standard_normal(rng, post.mean.size(), static_cast<Eigen::Index>(cfg.mc_samples));
  return energy_with_noise(post, batch, cfg, n_total, eps, &grad);
}

WeightPosterior train_constraint(std::span<const LabeledLatentPoint> data, const BnnArchitecture& arch,
                                 const AlphaTrainConfig& cfg) {
  cfg.validate();
  arch.validate();
  if (data.empty()) throw DegenerateDataError("no labeled points");
  const bool has_pos = std::any_of(data.begin(), data.end(), [](const auto& p) { return p.label == 1; });
  const bool has_neg = std::any_of(data.begin(), data.end(), [](const auto& p) { return p.label == 0; });
  if (!has_pos || !has_neg) throw DegenerateDataError("constraint data must contain both classes");

  WeightPosterior post = init_posterior(arch, cfg.seed);
  const auto d = static_cast<Eigen::Index>(arch.input_dim());
  const auto n = static_cast<Eigen::Index>(data.size());
  Vector mean = Vector::Zero(d);
  for (const auto& p : data) {
    if (p.z.size() != d) throw DimensionError("labeled point has wrong dimension");
    mean += p.z;
  }
  mean /= static_cast<double>(n);
  Vector var = Vector::Zero(d);
  for (const auto& p : data) var += (p.z - mean).cwiseAbs2();
  var /= static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  post.input_shift = mean;
  post.input_scale = var.unaryExpr([](double s) { return s > 1e-24 ? std::sqrt(s) : 1.0; });
  if (cfg.epochs == 0) return post;

  const Eigen::Index P = post.mean.size();
  Vector theta(2 * P);
  theta.head(P) = post.mean;
  theta.tail(P) = post.log_variance;
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam(theta.size(), adam_cfg);

  Rng rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = std::min(cfg.minibatch_size, data.size());
  std::vector<LabeledLatentPoint> batch;
  batch.reserve(bs);
  PosteriorGradient grad;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < data.size(); start += bs) {
      const std::size_t stop = std::min(data.size(), start + bs);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      const Matrix eps = standard_normal(rng, P, static_cast<Eigen::Index>(cfg.mc_samples));
      post.mean = theta.head(P);
      post.log_variance = theta.tail(P);
      double e = 0;
      try {
        e = energy_with_noise(post, batch, cfg, data.size(), eps, &grad);
      } catch (const NumericalError&) {
        throw TrainingDivergedError(epoch);
      }
      Vector g(2 * P);
      g.head(P) = grad.mean;
      g.tail(P) = grad.log_variance;
      if (!std::isfinite(e) || !g.allFinite()) throw TrainingDivergedError(epoch);
      adam.step(theta, g);
    }
  }
  post.mean = theta.head(P);
  post.log_variance = theta.tail(P);
  if (!post.mean.allFinite() || !post.log_variance.allFinite()) throw TrainingDivergedError(cfg.epochs - 1);
  return post;
}

ConstraintSampler::ConstraintSampler(const WeightPosterior& post, std::size_t mc_samples, std::uint64_t seed)
    : arch_(post.arch), shift_(post.input_shift), scale_(post.input_scale) {
  post.validate();
  if (mc_samples == 0) throw ConfigError("mc_samples", "must be at least 1");
  Rng rng(seed);
  const Matrix eps = standard_normal(rng, post.mean.size(), static_cast<Eigen::Index>(mc_samples));
  const Vector sd = (0.5 * post.log_variance.array()).exp().matrix();
  weights_ = (eps.array().colwise() * sd.array()).matrix();
  weights_.colwise() += post.mean;
}

double ConstraintSampler::probability(const Vector& z) const {
  return probability(Matrix(z.transpose()))[0];
}

Vector ConstraintSampler::probability(const Matrix& Zq) const {
  if (Zq.cols() != shift_.size()) throw DimensionError("query has wrong dimension");
  const auto layers = layers_of(arch_);
  const Matrix X = ((Zq.rowwise() - shift_.transpose()).array().rowwise() / scale_.transpose().array())
                       .matrix()
                       .transpose();
  Vector acc = Vector::Zero(Zq.rows());
  ForwardCache cache;
  for (Eigen::Index k = 0; k < weights_.cols(); ++k) {
    const Matrix& f = forward(layers, arch_.hidden_activation, weights_.col(k).data(), X, cache);
    acc += f.row(0).transpose().unaryExpr([](double t) { return sigmoid(t); });
  }
  return acc / static_cast<double>(weights_.cols());
}

double ConstraintSampler::probability(const Vector& z, Vector& grad) const {
  if (z.size() != shift_.size()) throw DimensionError("query has wrong dimension");
  const auto layers = layers_of(arch_);
  const Matrix X = ((z - shift_).array() / scale_.array()).matrix();
  ForwardCache cache;
  Matrix gx;
  Vector df(1);
  double p = 0;
  grad = Vector::Zero(z.size());
  for (Eigen::Index k = 0; k < weights_.cols(); ++k) {
    const double* w = weights_.col(k).data();
    const double s = sigmoid(forward(layers, arch_.hidden_activation, w, X, cache)(0, 0));
    p += s;
    df[0] = s * (1.0 - s);
    backward(layers, arch_.hidden_activation, w, X, cache, df, nullptr, &gx);
    grad += gx.col(0);
  }
  const double K = static_cast<double>(weights_.cols());
  grad = (grad.array() / scale_.array()).matrix() / K;
  return p / K;
}

Vector predict_prob(const WeightPosterior& post, const Matrix& Zq, std::size_t mc_samples, std::uint64_t seed) {
  return ConstraintSampler(post, mc_samples, seed).probability(Zq);
}

}  // namespace cbo
