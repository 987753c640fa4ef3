#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "cbo/bo_engine.hpp"
#include "cbo/branin.hpp"
#include "cbo/errors.hpp"
#include "support/fixtures.hpp"

namespace cbo {
namespace {

// Small budgets so the whole loop runs in well under a second per iteration.
BoConfig cheap_config() {
  BoConfig c;
  c.init_points = 10;
  c.iterations = 2;
  c.batch_size = 2;
  c.gp_training.epochs = 20;
  c.constraint_steps = 40;
  c.acquisition.restarts = 2;
  c.acquisition.max_quasi_newton_steps = 20;
  c.acquisition.constraint_mc_samples = 10;
  return c;
}

class AlwaysFeasible : public Problem {
 public:
  BoundedBox bounds() const override { return branin::BraninProblem::box(); }
  ProblemEvaluation evaluate(const LatentPoint& z, std::uint64_t) const override {
    return {branin::branin(z[0], z[1]), true};
  }
};

class Flaky : public Problem {
 public:
  BoundedBox bounds() const override { return BoundedBox::unit(2); }
  ProblemEvaluation evaluate(const LatentPoint& z, std::uint64_t) const override {
    if (z[0] < 0.5) throw std::runtime_error("evaluator down");
    return {z.squaredNorm(), true};
  }
};

void expect_same_trace(const BoTrace& a, const BoTrace& b) {
  ASSERT_EQ(a.observations.size(), b.observations.size());
  for (std::size_t i = 0; i < a.observations.size(); ++i) {
    EXPECT_EQ(a.observations[i].z, b.observations[i].z) << "observation " << i;
    EXPECT_EQ(a.observations[i].objective, b.observations[i].objective);
    EXPECT_EQ(a.observations[i].constraint_satisfied, b.observations[i].constraint_satisfied);
    EXPECT_EQ(a.observations[i].iteration, b.observations[i].iteration);
  }
  EXPECT_EQ(a.best_feasible_per_iteration, b.best_feasible_per_iteration);
}

TEST(BoLoop, ZeroIterationsRecordsOnlyTheInitialDesign) {
  const branin::BraninProblem problem;
  BoConfig c = cheap_config();
  c.iterations = 0;
  for (const BoTrace& t : {run_constrained_bo(problem, c), run_unconstrained_bo(problem, c)}) {
    ASSERT_EQ(t.observations.size(), 10u);
    for (const auto& o : t.observations) EXPECT_EQ(o.iteration, 0u);
    EXPECT_EQ(t.best_feasible_per_iteration.size(), 1u);
  }
}

TEST(BoLoop, SequentialTraceLengthIsInitPlusIterations) {
  const branin::BraninProblem problem;
  BoConfig c = cheap_config();
  c.batch_size = 1;
  c.iterations = 50;
  c.gp_training.epochs = 5;
  c.constraint_steps = 10;
  c.acquisition.restarts = 1;
  c.acquisition.max_quasi_newton_steps = 5;
  const BoTrace t = run_constrained_bo(problem, c);
  ASSERT_EQ(t.observations.size(), 60u);
  EXPECT_EQ(t.best_feasible_per_iteration.size(), 51u);
  EXPECT_EQ(t.observations.back().iteration, 50u);
}

TEST(BoLoop, BatchesAreTaggedWithTheirIteration) {
  const branin::BraninProblem problem;
  BoConfig c = cheap_config();
  c.iterations = 3;
  c.batch_size = 4;
  const BoTrace t = run_constrained_bo(problem, c);
  ASSERT_EQ(t.observations.size(), 22u);
  for (std::size_t i = 10; i < 22; ++i) EXPECT_EQ(t.observations[i].iteration, 1 + (i - 10) / 4);
}

TEST(BoLoop, BestFeasibleNeverIncreases) {
  const branin::BraninProblem problem;
  BoConfig c = cheap_config();
  c.iterations = 4;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    c.seed = seed;
    const BoTrace t = run_constrained_bo(problem, c);
    std::optional<double> prev;
    for (const auto& b : t.best_feasible_per_iteration) {
      if (prev) {
        ASSERT_TRUE(b.has_value());
        EXPECT_LE(*b, *prev);
      }
      if (b) prev = b;
    }
    EXPECT_EQ(t.best_feasible(), t.best_feasible_per_iteration.back());
  }
}

TEST(BoLoop, SameSeedSameTrace) {
  const branin::BraninProblem problem;
  const BoConfig c = cheap_config();
  expect_same_trace(run_constrained_bo(problem, c), run_constrained_bo(problem, c));
  BoConfig other = c;
  other.seed = 9;
  EXPECT_NE(run_constrained_bo(problem, c).observations.back().z,
            run_constrained_bo(problem, other).observations.back().z);
}

TEST(BoLoop, ConstrainedReducesToUnconstrainedWhenEverythingIsFeasible) {
  const AlwaysFeasible problem;
  const BoConfig c = cheap_config();
  expect_same_trace(run_constrained_bo(problem, c), run_unconstrained_bo(problem, c));
}

TEST(BoLoop, PointsStayInsideTheBounds) {
  const branin::BraninProblem problem;
  const BoTrace t = run_unconstrained_bo(problem, cheap_config());
  for (const auto& o : t.observations) EXPECT_TRUE(problem.bounds().contains(o.z));
}

TEST(BoLoop, EvaluatorFailureIsRecordedAndTheLoopContinues) {
  const Flaky problem;
  const BoTrace t = run_constrained_bo(problem, cheap_config());
  ASSERT_EQ(t.observations.size(), 14u);
  std::size_t failures = 0;
  for (const auto& o : t.observations) {
    if (o.z[0] < 0.5) {
      ++failures;
      EXPECT_FALSE(o.objective.has_value());
      EXPECT_FALSE(o.constraint_satisfied);
    } else {
      EXPECT_TRUE(o.objective.has_value());
    }
  }
  EXPECT_GT(failures, 0u);
}

TEST(BoLoop, RejectsZeroBatchAndInit) {
  const branin::BraninProblem problem;
  BoConfig c = cheap_config();
  c.batch_size = 0;
  EXPECT_THROW(run_constrained_bo(problem, c), ConfigError);
  c = cheap_config();
  c.init_points = 0;
  EXPECT_THROW(run_unconstrained_bo(problem, c), ConfigError);
}

// --- Kriging believer -------------------------------------------------------

// One smooth bump with its minimum at (0.5, 0.5) in the unit square.
FitcModel bump_gp() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(25, 2);
  Vector y(25);
  for (Eigen::Index i = 0; i < 25; ++i) {
    X(i, 0) = u(rng);
    X(i, 1) = u(rng);
    y[i] = -std::exp(-(X.row(i).array() - 0.5).square().sum() / 0.1);
  }
  return fixture::conditioned_gp(X, y, 0.3, 1.0, 1e-4);
}

AcquisitionConfig unit_square_config(std::uint64_t seed) {
  AcquisitionConfig a;
  a.bounds = BoundedBox::unit(2);
  a.restarts = 4;
  a.seed = seed;
  return a;
}

TEST(KrigingBeliever, BatchOfOneIsASingleAcquisition) {
  const FitcModel gp = bump_gp();
  const Incumbent inc{-0.9, true};
  const AcquisitionConfig a = unit_square_config(5);
  const auto batch = kriging_believer_batch(gp, nullptr, inc, 1, a);
  const AcquisitionResult single = optimize_acquisition(Surrogates{&gp, nullptr, 1.0}, inc, a);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0], single.z);
}

TEST(KrigingBeliever, HallucinationSpreadsTheBatch) {
  const FitcModel gp = bump_gp();
  const Incumbent inc{-0.9, true};
  const auto batch = kriging_believer_batch(gp, nullptr, inc, 3, unit_square_config(5));
  ASSERT_EQ(batch.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) EXPECT_GT((batch[i] - batch[j]).norm(), 1e-3) << i << " vs " << j;
  }
}

TEST(KrigingBeliever, DeterministicAndLeavesTheModelUntouched) {
  const FitcModel gp = bump_gp();
  const Vector probe = Vector::Constant(2, 0.3);
  const auto before = gp.predict_point(probe);
  const Incumbent inc{-0.9, true};
  const auto a = kriging_believer_batch(gp, nullptr, inc, 3, unit_square_config(8));
  const auto b = kriging_believer_batch(gp, nullptr, inc, 3, unit_square_config(8));
  EXPECT_EQ(a, b);
  EXPECT_EQ(gp.predict_point(probe).mean, before.mean);
  EXPECT_EQ(gp.predict_point(probe).variance, before.variance);
}

TEST(KrigingBeliever, ZeroBatchThrows) {
  const FitcModel gp = bump_gp();
  EXPECT_THROW(kriging_believer_batch(gp, nullptr, Incumbent{}, 0, unit_square_config(0)), ConfigError);
}

// --- random sampling ---------------------------------------------------------

TEST(RandomBaseline, SameSeedSameTrace) {
  const branin::BraninProblem problem;
  const BoTrace a = random_sampling_baseline(problem, 60, 4);
  expect_same_trace(a, random_sampling_baseline(problem, 60, 4));
  ASSERT_EQ(a.observations.size(), 60u);
  EXPECT_EQ(a.best_feasible_per_iteration.size(), 60u);
}

TEST(RandomBaseline, DenseSamplingFindsTheFeasibleMinimum) {
  const branin::BraninProblem problem;
  const BoTrace t = random_sampling_baseline(problem, 100000, 1);
  ASSERT_TRUE(t.best_feasible().has_value());
  EXPECT_NEAR(*t.best_feasible(), 0.397887, 0.05);
  EXPECT_GE(*t.best_feasible(), 0.397887 - 1e-6);
}

TEST(RandomBaseline, ZeroBudgetThrows) {
  EXPECT_THROW(random_sampling_baseline(branin::BraninProblem{}, 0, 0), ConfigError);
}

// --- trace CSV ----------------------------------------------------------------

TEST(TraceCsv, HeaderRowsAndMissingObjective) {
  BoTrace t;
  t.observations.push_back(Observation{Vector::Constant(2, 0.5), 1.25, true, 0});
  t.observations.push_back(Observation{Vector::Constant(2, 0.1), std::nullopt, false, 1});
  std::ostringstream out;
  write_trace_csv(out, t);
  EXPECT_EQ(out.str(), "iteration,z0,z1,objective,constraint_satisfied\n0,0.5,0.5,1.25,1\n1,0.1,0.1,,0\n");
}

TEST(TraceCsv, NumbersRoundTrip) {
  BoTrace t;
  const double x = 1.0 / 3.0;
  t.observations.push_back(Observation{Vector::Constant(1, x), std::nextafter(x, 1.0), false, 0});
  std::ostringstream out;
  write_trace_csv(out, t);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  const auto c1 = row.find(',');
  const auto c2 = row.find(',', c1 + 1);
  EXPECT_EQ(std::stod(row.substr(c1 + 1, c2 - c1 - 1)), x);
  EXPECT_EQ(std::stod(row.substr(c2 + 1)), std::nextafter(x, 1.0));
}

}  // namespace
}  // namespace cbo
