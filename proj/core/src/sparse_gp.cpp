#include "cbo/sparse_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cbo/errors.hpp"
#include "cbo/random.hpp"

namespace cbo {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

Eigen::LLT<Matrix> cholesky_or_throw(const Matrix& A, const char* name) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(name, "matrix is not positive definite after jitter");
  }
  return llt;
}

// Intermediate quantities of the FITC objective that the gradient reuses.
struct FitcTerms {
  Matrix Kuu0;  // K(Z, Z) without jitter
  Matrix Kuf;   // K(Z, X)
  Eigen::LLT<Matrix> Lu;
  Matrix V;       // Lu^{-1} Kuf
  Vector lambda;  // diag(Kff - Qff) + noise
  Eigen::LLT<Matrix> LB;
  Matrix Vl;  // V Lambda^{-1/2}
  Vector c;   // LB^{-1} Vl Lambda^{-1/2} y
  double nlml = 0;
};

FitcTerms fitc_terms(const KernelHyperparams& hp, const Matrix& Z, double noise, double jitter,
                     const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw DimensionError("X rows and y length differ");
  if (X.rows() == 0) throw DimensionError("FITC objective needs at least one observation");
  FitcTerms t;
  const Eigen::Index m = Z.rows();
  const double s2 = std::exp(hp.log_signal_variance);
  t.Kuu0 = ard_kernel(Z, Z, hp);
  t.Lu = cholesky_or_throw(t.Kuu0 + jitter * Matrix::Identity(m, m), "Kuu");
  t.Kuf = ard_kernel(Z, X, hp);
  t.V = t.Lu.matrixL().solve(t.Kuf);
  const Vector q = t.V.colwise().squaredNorm().transpose();
  t.lambda = ((s2 - q.array()).max(0.0) + noise).matrix();
  if ((t.lambda.array() <= 0.0).any() || !t.lambda.allFinite()) {
    throw NumericalError("Lambda", "FITC diagonal correction is not positive");
  }
  const Vector inv_sqrt = t.lambda.array().rsqrt();
  t.Vl = t.V * inv_sqrt.asDiagonal();
  const Matrix B = Matrix::Identity(m, m) + t.Vl * t.Vl.transpose();
  t.LB = cholesky_or_throw(B, "B");
  const Vector yl = y.cwiseProduct(inv_sqrt);
  t.c = t.LB.matrixL().solve(t.Vl * yl);
  const double quad = yl.squaredNorm() - t.c.squaredNorm();
  const Matrix& LBm = t.LB.matrixLLT();
  const double logdet = 2.0 * LBm.diagonal().array().log().sum() + t.lambda.array().log().sum();
  t.nlml = 0.5 * (quad + logdet + static_cast<double>(X.rows()) * kLog2Pi);
  return t;
}

// Fills grad from the FITC terms (see header); W = C^{-1} - alpha alpha^T.
void fitc_gradient(const KernelHyperparams& hp, const Matrix& Z, double noise,
                   const Matrix& X, const Vector& y, const FitcTerms& t, FitcGradient& grad) {
  const Eigen::Index m = Z.rows();
  const Eigen::Index d = Z.cols();
  const double s2 = std::exp(hp.log_signal_variance);

  // C^{-1} = Lambda^{-1} - T^T T with T = LB^{-1} V Lambda^{-1}.
  const Vector inv_lambda = t.lambda.cwiseInverse();
  const Matrix T = t.LB.matrixL().solve(t.V * inv_lambda.asDiagonal());
  Matrix W = -(T.transpose() * T);
  W.diagonal() += inv_lambda;
  const Vector alpha = W * y;
  W.noalias() -= alpha * alpha.transpose();

  const Vector w_diag = W.diagonal();
  Matrix W_off = W;
  W_off.diagonal().setZero();

  const Matrix P = t.Lu.matrixU().solve(t.V);  // Kuu^{-1} Kuf
  const Matrix G_uf = P * W_off;
  const Matrix G_uu = -0.5 * (G_uf * P.transpose());

  const Matrix E = G_uf.cwiseProduct(t.Kuf);
  const Matrix F = G_uu.cwiseProduct(t.Kuu0);

  grad.log_signal_variance = E.sum() + F.sum() + 0.5 * s2 * w_diag.sum();
  grad.log_noise_variance = 0.5 * noise * w_diag.sum();
  grad.log_lengthscales.resize(d);
  grad.inducing_locations.resize(m, d);

  const Vector e_row = E.rowwise().sum();
  const Vector e_col = E.colwise().sum().transpose();
  const Vector f_row = F.rowwise().sum();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double inv_l2 = std::exp(-2.0 * hp.log_lengthscales[j]);
    const Vector zj = Z.col(j);
    const Vector xj = X.col(j);
    const Vector Exj = E * xj;
    const Vector Fzj = F * zj;
    const double sum_e_sq = e_row.dot(zj.cwiseAbs2()) - 2.0 * zj.dot(Exj) + e_col.dot(xj.cwiseAbs2());
    const double sum_f_sq = 2.0 * f_row.dot(zj.cwiseAbs2()) - 2.0 * zj.dot(Fzj);
    grad.log_lengthscales[j] = (sum_e_sq + sum_f_sq) * inv_l2;
    grad.inducing_locations.col(j) =
        -inv_l2 * (e_row.cwiseProduct(zj) - Exj + 2.0 * (f_row.cwiseProduct(zj) - Fzj));
  }
}

}  // namespace

void KernelHyperparams::validate() const {
  if (log_lengthscales.size() == 0) throw ConfigError("log_lengthscales", "empty");
  for (Eigen::Index j = 0; j < log_lengthscales.size(); ++j) {
    const double l = std::exp(log_lengthscales[j]);
    if (!std::isfinite(l) || !(l > 0.0)) {
      throw ConfigError("log_lengthscales", "lengthscale " + std::to_string(j) + " is not finite and positive");
    }
  }
  const double s2 = std::exp(log_signal_variance);
  if (!std::isfinite(s2) || !(s2 > 0.0)) {
    throw ConfigError("log_signal_variance", "signal variance is not finite and positive");
  }
}

Matrix ard_kernel(const Matrix& X, const Matrix& X2, const KernelHyperparams& hp) {
  const auto d = static_cast<Eigen::Index>(hp.dim());
  if (X.cols() != d || X2.cols() != d) {
    throw DimensionError("ard_kernel: inputs have " + std::to_string(X.cols()) + " and " +
                         std::to_string(X2.cols()) + " columns, kernel expects " + std::to_string(d));
  }
  const Vector inv_l = (-hp.log_lengthscales.array()).exp().matrix();
  const Matrix A = X * inv_l.asDiagonal();
  const Matrix B = X2 * inv_l.asDiagonal();
  const Vector a2 = A.rowwise().squaredNorm();
  const Vector b2 = B.rowwise().squaredNorm();
  Matrix sq = (-2.0 * A * B.transpose()).colwise() + a2;
  sq.rowwise() += b2.transpose();
  const double s2 = std::exp(hp.log_signal_variance);
  return (s2 * (-0.5 * sq.array().max(0.0)).exp()).matrix();
}

struct FitcModel::Factorization {
  Eigen::LLT<Matrix> Lu;
  Eigen::LLT<Matrix> LB;
  Vector mean_weights;  // Kuu^{-1}-side weights: mean(z) = k_u(z)^T mean_weights
};

FitcModel::FitcModel(KernelHyperparams kernel, Matrix inducing_locations, double log_noise_variance,
                     double jitter)
    : kernel_(std::move(kernel)),
      inducing_(std::move(inducing_locations)),
      log_noise_variance_(log_noise_variance),
      jitter_(jitter) {
  validate();
}

void FitcModel::validate() const {
  kernel_.validate();
  if (inducing_.rows() < 1) throw ConfigError("inducing_locations", "need at least one inducing point");
  if (inducing_.cols() != static_cast<Eigen::Index>(kernel_.dim())) {
    throw DimensionError("inducing locations have " + std::to_string(inducing_.cols()) +
                         " columns, kernel has " + std::to_string(kernel_.dim()) + " lengthscales");
  }
  if (!(jitter_ > 0.0)) throw ConfigError("jitter", "must be positive");
  if (!std::isfinite(std::exp(log_noise_variance_))) {
    throw ConfigError("log_noise_variance", "noise variance is not finite");
  }
}

double FitcModel::noise_variance() const { return std::exp(log_noise_variance_); }

void FitcModel::set_kernel(KernelHyperparams kernel) {
  kernel_ = std::move(kernel);
  invalidate();
  validate();
}

void FitcModel::set_inducing_locations(Matrix inducing) {
  inducing_ = std::move(inducing);
  invalidate();
  validate();
}

void FitcModel::set_log_noise_variance(double value) {
  log_noise_variance_ = value;
  invalidate();
  validate();
}

void FitcModel::condition_on(Matrix X, Vector y) {
  if (X.cols() != static_cast<Eigen::Index>(dim())) {
    throw DimensionError("training inputs have " + std::to_string(X.cols()) + " columns, model expects " +
                         std::to_string(dim()));
  }
  FitcTerms t = fitc_terms(kernel_, inducing_, noise_variance(), jitter_, X, y);
  auto f = std::make_shared<Factorization>();
  const Vector beta = t.LB.matrixU().solve(t.c);
  f->mean_weights = t.Lu.matrixU().solve(beta);
  f->Lu = std::move(t.Lu);
  f->LB = std::move(t.LB);
  X_ = std::move(X);
  y_ = std::move(y);
  cache_ = std::move(f);
}

FitcModel FitcModel::with_observation(const Vector& z, double y, bool add_inducing) const {
  if (z.size() != static_cast<Eigen::Index>(dim())) throw DimensionError("observation has wrong dimension");
  Matrix inducing = inducing_;
  if (add_inducing) {
    const Eigen::ArrayXd inv_ls = (-kernel_.log_lengthscales.array()).exp();
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < inducing_.rows(); ++m) {
      nearest = std::min(nearest, ((inducing_.row(m).transpose() - z).array() * inv_ls).square().sum());
    }
    if (nearest > 1e-8) {
      inducing.conservativeResize(inducing.rows() + 1, Eigen::NoChange);
      inducing.row(inducing.rows() - 1) = z.transpose();
    }
  }
  FitcModel out(kernel_, std::move(inducing), log_noise_variance_, jitter_);
  Matrix X(X_.rows() + 1, static_cast<Eigen::Index>(dim()));
  X.topRows(X_.rows()) = X_;
  X.row(X_.rows()) = z.transpose();
  Vector yy(y_.size() + 1);
  yy.head(y_.size()) = y_;
  yy[y_.size()] = y;
  out.condition_on(std::move(X), std::move(yy));
  return out;
}

const FitcModel::Factorization& FitcModel::factorization() const {
  if (!cache_) throw StaleStateError("FITC model has no factorization; call condition_on or fit first");
  return *cache_;
}

GpPrediction FitcModel::predict(const Matrix& Zq) const {
  const Factorization& f = factorization();
  if (Zq.rows() < 1) throw DimensionError("predict needs at least one query point");
  const Matrix Kuq = ard_kernel(inducing_, Zq, kernel_);
  const Matrix w = f.Lu.matrixL().solve(Kuq);
  const Matrix wb = f.LB.matrixL().solve(w);
  const double s2 = std::exp(kernel_.log_signal_variance);
  GpPrediction out;
  out.mean = Kuq.transpose() * f.mean_weights;
  out.latent_variance =
      (s2 - w.colwise().squaredNorm().array() + wb.colwise().squaredNorm().array()).max(0.0).transpose();
  out.noise_variance = noise_variance();
  return out;
}

PointPrediction FitcModel::predict_point(const Vector& z) const {
  const Factorization& f = factorization();
  const auto d = static_cast<Eigen::Index>(dim());
  if (z.size() != d) throw DimensionError("query has wrong dimension");
  const Matrix zq = z.transpose();
  const Vector k = ard_kernel(inducing_, zq, kernel_).col(0);
  const Vector w = f.Lu.matrixL().solve(k);
  const Vector binv_w = f.LB.solve(w);
  const double s2 = std::exp(kernel_.log_signal_variance);

  PointPrediction out;
  out.mean = k.dot(f.mean_weights);
  out.variance = std::max(0.0, s2 - w.dot(w) + w.dot(binv_w));

  // dk_m/dz_j = -k_m (z_j - Z_mj) / l_j^2
  const Vector r = f.Lu.matrixU().solve(Vector(w - binv_w));
  const Vector inv_l2 = (-2.0 * kernel_.log_lengthscales.array()).exp().matrix();
  out.mean_grad.resize(d);
  out.variance_grad.resize(d);
  const Vector km = k.cwiseProduct(f.mean_weights);
  const Vector kr = k.cwiseProduct(r);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Vector diff = (z[j] - inducing_.col(j).array()).matrix();
    out.mean_grad[j] = -inv_l2[j] * diff.dot(km);
    out.variance_grad[j] = 2.0 * inv_l2[j] * diff.dot(kr);
  }
  if (out.variance <= 0.0) out.variance_grad.setZero();
  return out;
}

double fitc_negative_log_marginal(const FitcModel& model, const Matrix& X, const Vector& y) {
  if (X.cols() != static_cast<Eigen::Index>(model.dim())) throw DimensionError("X has wrong column count");
  return fitc_terms(model.kernel(), model.inducing_locations(), model.noise_variance(), model.jitter(), X, y)
      .nlml;
}

double fitc_negative_log_marginal(const FitcModel& model, const Matrix& X, const Vector& y,
                                  FitcGradient& grad) {
  if (X.cols() != static_cast<Eigen::Index>(model.dim())) throw DimensionError("X has wrong column count");
  const FitcTerms t =
      fitc_terms(model.kernel(), model.inducing_locations(), model.noise_variance(), model.jitter(), X, y);
  fitc_gradient(model.kernel(), model.inducing_locations(), model.noise_variance(), X, y, t, grad);
  return t.nlml;
}

namespace {

// Flat parameter layout used by the trainer:
// [log l (d) | log s^2 | log noise | Z column-major (M*d, optional)]
Vector pack(const FitcModel& m, const GpFitOptions& opt) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  const auto nz = opt.optimize_inducing ? m.inducing_locations().size() : 0;
  Vector theta(d + 2 + nz);
  theta.head(d) = m.kernel().log_lengthscales;
  theta[d] = m.kernel().log_signal_variance;
  theta[d + 1] = m.log_noise_variance();
  if (nz > 0) theta.tail(nz) = m.inducing_locations().reshaped();
  return theta;
}

FitcModel unpack(const Vector& theta, const FitcModel& like, const GpFitOptions& opt) {
  const auto d = static_cast<Eigen::Index>(like.dim());
  KernelHyperparams hp{theta.head(d), theta[d]};
  Matrix Z = like.inducing_locations();
  if (opt.optimize_inducing) Z = theta.tail(Z.size()).reshaped(Z.rows(), Z.cols());
  return FitcModel(std::move(hp), std::move(Z), theta[d + 1], like.jitter());
}

Vector pack_grad(const FitcGradient& g, const GpFitOptions& opt) {
  const auto d = g.log_lengthscales.size();
  const auto nz = opt.optimize_inducing ? g.inducing_locations.size() : 0;
  Vector out(d + 2 + nz);
  out.head(d) = g.log_lengthscales;
  out[d] = g.log_signal_variance;
  out[d + 1] = opt.optimize_noise ? g.log_noise_variance : 0.0;
  if (nz > 0) out.tail(nz) = g.inducing_locations.reshaped();
  return out;
}

}  // namespace

FitcModel fit(const FitcModel& model, const Matrix& X, const Vector& y, const AdamConfig& cfg,
              const GpFitOptions& options) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || static_cast<Eigen::Index>(n) != y.size()) throw DimensionError("fit: X rows and y length differ");
  if (n < cfg.minibatch_size) {
    throw ConfigError("minibatch_size", "larger than the number of observations (" + std::to_string(n) + ")");
  }

  FitcModel best = model;
  best.condition_on(X, y);
  double best_loss = fitc_negative_log_marginal(best, X, y);
  if (cfg.epochs == 0) return best;

  Vector theta = pack(model, options);
  AdamState adam(theta.size(), cfg);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      const std::size_t stop = std::min(n, start + cfg.minibatch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);
      Matrix Xb(b, X.cols());
      Vector yb(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        Xb.row(i) = X.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)]));
        yb[i] = y[order[start + static_cast<std::size_t>(i)]];
      }
      FitcGradient g;
      double loss = 0;
      try {
        loss = fitc_negative_log_marginal(unpack(theta, model, options), Xb, yb, g);
      } catch (const Error&) {
        throw TrainingDivergedError(epoch);
      }
      // minibatch objective is the batch FITC term rescaled by n/b
      Vector grad = pack_grad(g, options) * (static_cast<double>(n) / static_cast<double>(b));
      if (!std::isfinite(loss) || !grad.allFinite()) throw TrainingDivergedError(epoch);
      adam.step(theta, grad);
    }
    if (!theta.allFinite()) throw TrainingDivergedError(epoch);

    double loss = std::numeric_limits<double>::infinity();
    FitcModel current = [&] {
      try {
        return unpack(theta, model, options);
      } catch (const Error&) {
        throw TrainingDivergedError(epoch);
      }
    }();
    try {
      loss = fitc_negative_log_marginal(current, X, y);
    } catch (const NumericalError&) {
      throw TrainingDivergedError(epoch);
    }
    if (!std::isfinite(loss)) throw TrainingDivergedError(epoch);
    if (loss < best_loss) {
      best_loss = loss;
      best = std::move(current);
    }
  }
  if (!best.is_factorized()) best.condition_on(X, y);
  return best;
}

FitcModel initial_fitc_model(const Matrix& X, const Vector& y, std::size_t num_inducing, std::uint64_t seed,
                             double jitter) {
  if (X.rows() == 0) throw DimensionError("initial_fitc_model needs data");
  if (num_inducing == 0) throw ConfigError("num_inducing", "must be positive");
  const Eigen::Index d = X.cols();
  const Eigen::Index n = X.rows();

  KernelHyperparams hp;
  hp.log_lengthscales.resize(d);
  const Vector mean = X.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = n > 1 ? (X.col(j).array() - mean[j]).square().sum() / static_cast<double>(n - 1) : 0.0;
    const double spread = var > 1e-12 ? std::sqrt(var) : 1.0;
    hp.log_lengthscales[j] = std::log(spread);
  }
  const double ymean = y.mean();
  const double yvar = n > 1 ? (y.array() - ymean).square().sum() / static_cast<double>(n - 1) : 1.0;
  const double s2 = yvar > 1e-12 ? yvar : 1.0;
  hp.log_signal_variance = std::log(s2);

  Rng rng(seed);
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle(idx, rng);
  const auto m = static_cast<Eigen::Index>(num_inducing);
  Matrix Z(m, d);
  const Vector lo = X.colwise().minCoeff().transpose();
  const Vector hi = X.colwise().maxCoeff().transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i < n) {
      Z.row(i) = X.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
    } else {
      for (Eigen::Index j = 0; j < d; ++j) Z(i, j) = lo[j] + uniform01(rng) * (hi[j] - lo[j]);
    }
  }
  return FitcModel(std::move(hp), std::move(Z), std::log(1e-2 * s2), jitter);
}

GpPrediction predict(const FitcModel& model, const Matrix& Zq) { return model.predict(Zq); }

}  // namespace cbo
