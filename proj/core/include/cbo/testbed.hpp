#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cbo/bo_engine.hpp"
#include "cbo/types.hpp"

namespace cbo::testbed {

/// Stand-in for a trained decoder. Each anchor plays a training latent and
/// owns one template molecule. Decoding succeeds with probability
/// p_valid(z) = exp(-(d/lambda)^2), d the distance to the nearest anchor.
/// Otherwise it yields methane ("C") with probability kappa and a corrupted,
/// invalid string the rest of the time.
class SyntheticDecoder {
 public:
  SyntheticDecoder(Matrix anchors, double validity_lengthscale, double methane_bias,
                   std::vector<std::string> template_pool);

  const Matrix& anchors() const noexcept { return anchors_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(anchors_.cols()); }
  double validity_lengthscale() const noexcept { return lambda_; }
  double methane_bias() const noexcept { return kappa_; }
  const std::vector<std::string>& template_pool() const noexcept { return templates_; }

  /// Distance to and index of the nearest anchor.
  double nearest_distance(const Vector& z, std::size_t* index = nullptr) const;
  double p_valid(const Vector& z) const;

  /// `attempts` independent decodes, deterministic in (z, seed).
  std::vector<std::string> decode(const Vector& z, std::size_t attempts, std::uint64_t seed) const;

  /// An invalid variant of `s`: drops a ring digit, unbalances a parenthesis,
  /// inserts an illegal character or truncates, retrying until the result
  /// fails check_validity.
  static std::string corrupt(const std::string& s, std::uint64_t seed);

 private:
  Matrix anchors_;
  double lambda_;
  double kappa_;
  std::vector<std::string> templates_;
};

/// n standard-normal anchors in d dimensions.
Matrix make_anchors(std::size_t n, std::size_t dim, std::uint64_t seed);

/// The 50 shipped template molecules (data/smiles/templates.txt, compiled in).
const std::vector<std::string>& default_templates();

/// z'_i = z_i + eps * |z_i| * g_i with g_i standard normal; one row per point.
Matrix perturb_training_points(const Matrix& points, double noise_fraction, std::uint64_t seed);

struct DiagnosticConfig {
  std::size_t points_per_group = 50;
  std::size_t decode_attempts = 500;
  std::uint64_t seed = 0;
  /// Box for the far group (uniform draws stand in for optimizer-collected points).
  BoundedBox random_bounds;

  void validate() const;
};

struct DiagnosticRow {
  std::string group;
  double pct_valid = 0;
  double pct_methane = 0;
  double pct_druglike = 0;
};

/// Groups train, noise_1pct, noise_10pct, noise_50pct, random. The first four
/// take disjoint anchor sets of points_per_group each.
std::vector<DiagnosticRow> diagnostic_experiment(const SyntheticDecoder& dec, const DiagnosticConfig& cfg);

void write_diagnostic_csv(std::ostream& out, const std::vector<DiagnosticRow>& rows);

/// Uniform points over `bounds`, each labeled by label_latent_point on its decodes.
std::vector<LabeledLatentPoint> generate_negative_class(const BoundedBox& bounds, std::size_t n_points,
                                                        std::size_t attempts, const SyntheticDecoder& dec,
                                                        std::uint64_t seed);

struct ComponentScores {
  double primary = 0;  // logP or QED
  double sa = 0;
  double ring_penalty = 0;
};

/// primary - sa - ring_penalty.
double composite_objective(const ComponentScores& c);

/// Sum of Gaussian bumps on the first `bumps` anchors, heights rising from 1
/// to 2, plus N(0, noise_sd^2) evaluation noise. Larger is better.
class LatentObjective {
 public:
  LatentObjective(Matrix anchors, std::size_t bumps = 5, double width = 1.5, double noise_sd = 0.05);

  double mean(const Vector& z) const;
  /// mean(z) plus noise drawn from `seed`.
  double evaluate(const Vector& z, std::uint64_t seed) const;

  const Matrix& centers() const noexcept { return centers_; }
  const Vector& heights() const noexcept { return heights_; }
  double noise_sd() const noexcept { return noise_sd_; }

 private:
  Matrix centers_;
  Vector heights_;
  double width_;
  double noise_sd_;
};

double synthetic_latent_objective(const Vector& z, const Matrix& anchors, std::uint64_t seed);

struct TestbedConfig {
  std::size_t dim = 56;
  std::size_t anchors = 500;
  double validity_lengthscale = 3.0;
  double methane_bias = 0.7;
  double box_half_width = 5.0;
  std::size_t decode_attempts = 100;
  std::size_t negative_points = 500;
  std::uint64_t seed = 0;  // anchors and objective; independent of the BO seed

  void validate() const;
  /// Setting for the BO comparison: d = 16, lambda = 5. Five hundred anchors
  /// do not cover 56 dimensions, and a network trained on anchors against
  /// uniform negatives puts its boundary near distance 6 from the anchors.
  static TestbedConfig for_bo();
};

/// The latent optimization problem: minimize -score. An evaluation decodes
/// the point; the label is label_latent_point over the decodes, and the
/// objective is present only when the most frequent decode is valid.
/// The initial design is the anchors; the constraint pool is the negative class.
class TestbedProblem : public Problem {
 public:
  explicit TestbedProblem(const TestbedConfig& cfg);

  BoundedBox bounds() const override;
  ProblemEvaluation evaluate(const LatentPoint& z, std::uint64_t seed) const override;
  std::vector<LatentPoint> initial_design(std::size_t count, std::uint64_t seed) const override;
  std::vector<LabeledLatentPoint> constraint_pool(std::uint64_t seed) const override;

  const SyntheticDecoder& decoder() const noexcept { return decoder_; }
  const LatentObjective& objective() const noexcept { return objective_; }
  const TestbedConfig& config() const noexcept { return cfg_; }

 private:
  TestbedConfig cfg_;
  SyntheticDecoder decoder_;
  LatentObjective objective_;
};

/// BO settings for the latent problem: 20 iterations of batch 10 from the
/// anchors, two 100-unit ReLU layers retrained for 300 Adam steps.
BoConfig testbed_bo_config(std::size_t dim = 16);

/// Share of optimizer-collected observations (iteration >= 1) labeled drug-like.
double drug_like_fraction(const BoTrace& trace);

}  // namespace cbo::testbed
