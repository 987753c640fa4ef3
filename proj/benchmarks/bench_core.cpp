#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "cbo/acquisition.hpp"
#include "cbo/bnn.hpp"
#include "cbo/branin.hpp"
#include "cbo/smiles.hpp"
#include "cbo/sparse_gp.hpp"

namespace {

using namespace cbo;

void branin_data(Eigen::Index n, Matrix& X, Vector& y) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  X.resize(n, 2);
  y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.row(i) << u(rng), u(rng);
    y[i] = branin::branin(-5.0 + 15.0 * X(i, 0), 15.0 * X(i, 1));
  }
  y = (y.array() - y.mean()) / std::sqrt((y.array() - y.mean()).square().mean());
}

FitcModel make_gp(const Matrix& X, Eigen::Index m) {
  return FitcModel(KernelHyperparams{Vector::Constant(X.cols(), std::log(0.3)), 0.0}, X.topRows(m), std::log(1e-2));
}

void BM_FitcObjectiveAndGradient(benchmark::State& state) {
  Matrix X;
  Vector y;
  branin_data(state.range(0), X, y);
  const FitcModel gp = make_gp(X, state.range(1));
  FitcGradient grad;
  for (auto _ : state) benchmark::DoNotOptimize(fitc_negative_log_marginal(gp, X, y, grad));
}
BENCHMARK(BM_FitcObjectiveAndGradient)->Args({10, 5})->Args({60, 20})->Args({500, 20});

void BM_FitcPredictPoint(benchmark::State& state) {
  Matrix X;
  Vector y;
  branin_data(state.range(0), X, y);
  FitcModel gp = make_gp(X, 20);
  gp.condition_on(X, y);
  const Vector z = (Vector(2) << 0.4, 0.6).finished();
  for (auto _ : state) benchmark::DoNotOptimize(gp.predict_point(z));
}
BENCHMARK(BM_FitcPredictPoint)->Arg(60)->Arg(500);

std::vector<LabeledLatentPoint> disk_batch(std::size_t n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u1(-5.0, 10.0), u2(0.0, 15.0);
  std::vector<LabeledLatentPoint> data(n);
  for (auto& p : data) {
    p.z = Vector(2);
    p.z << u1(rng), u2(rng);
    p.label = branin::disk_constraint(p.z[0], p.z[1]) ? 1 : 0;
  }
  return data;
}

void BM_AlphaEnergyStep(benchmark::State& state) {
  const auto batch = disk_batch(10);
  const WeightPosterior post = init_posterior(BnnArchitecture::single_hidden(2, 50), 3);
  AlphaTrainConfig cfg;
  cfg.mc_samples = static_cast<std::size_t>(state.range(0));
  PosteriorGradient grad;
  for (auto _ : state) benchmark::DoNotOptimize(alpha_energy(post, batch, cfg, 200, grad));
}
BENCHMARK(BM_AlphaEnergyStep)->Arg(10)->Arg(50);

void BM_OptimizeAcquisition(benchmark::State& state) {
  Matrix X;
  Vector y;
  branin_data(30, X, y);
  FitcModel gp = make_gp(X, 10);
  gp.condition_on(X, y);
  WeightPosterior post = init_posterior(BnnArchitecture::single_hidden(2, 50), 4);
  post.log_variance.setConstant(std::log(1e-4));
  AcquisitionConfig cfg;
  cfg.bounds = BoundedBox(Vector::Zero(2), Vector::Ones(2));
  cfg.restarts = static_cast<std::size_t>(state.range(0));
  const Incumbent inc{y.minCoeff(), true};
  for (auto _ : state) benchmark::DoNotOptimize(optimize_acquisition(gp, post, inc, cfg));
}
BENCHMARK(BM_OptimizeAcquisition)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

std::vector<std::string> corpus() {
  std::ifstream in(std::string(CBO_DATA_DIR) + "/smiles/corpus.txt");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

void BM_SmilesValidity(benchmark::State& state) {
  const auto lines = corpus();
  for (auto _ : state)
    for (const auto& s : lines) benchmark::DoNotOptimize(smiles::check_validity(s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lines.size()));
}
BENCHMARK(BM_SmilesValidity);

void BM_OneHotRoundTrip(benchmark::State& state) {
  const auto lines = corpus();
  const auto& alphabet = smiles::Alphabet::standard();
  for (auto _ : state)
    for (const auto& s : lines)
      benchmark::DoNotOptimize(smiles::decode_one_hot(smiles::encode_one_hot(s, alphabet, 64), alphabet));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lines.size()));
}
BENCHMARK(BM_OneHotRoundTrip);

}  // namespace

BENCHMARK_MAIN();
