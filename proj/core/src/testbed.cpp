#include "cbo/testbed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "cbo/errors.hpp"
#include "cbo/random.hpp"
#include "cbo/smiles.hpp"

namespace cbo::testbed {

namespace {

constexpr std::string_view kTemplates =
#include "templates.inc"
    ;

std::string format_pct(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

SyntheticDecoder::SyntheticDecoder(Matrix anchors, double validity_lengthscale, double methane_bias,
                                   std::vector<std::string> template_pool)
    : anchors_(std::move(anchors)),
      lambda_(validity_lengthscale),
      kappa_(methane_bias),
      templates_(std::move(template_pool)) {
  if (anchors_.rows() == 0 || anchors_.cols() == 0) throw ConfigError("anchors", "need at least one anchor");
  if (!(lambda_ > 0.0)) throw ConfigError("validity_lengthscale", "must be positive");
  if (!(kappa_ >= 0.0 && kappa_ <= 1.0)) throw ConfigError("methane_bias", "must lie in [0, 1]");
  if (templates_.empty()) throw ConfigError("template_pool", "need at least one template");
  for (const auto& t : templates_) {
    if (!smiles::check_validity(t).valid) throw ConfigError("template_pool", "invalid template '" + t + "'");
  }
}

double SyntheticDecoder::nearest_distance(const Vector& z, std::size_t* index) const {
  if (z.size() != anchors_.cols()) throw DimensionError("latent point has wrong dimension");
  Eigen::Index best = 0;
  const double d2 = (anchors_.rowwise() - z.transpose()).rowwise().squaredNorm().minCoeff(&best);
  if (index) *index = static_cast<std::size_t>(best);
  return std::sqrt(d2);
}

double SyntheticDecoder::p_valid(const Vector& z) const {
  const double r = nearest_distance(z) / lambda_;
  return std::exp(-r * r);
}

std::vector<std::string> SyntheticDecoder::decode(const Vector& z, std::size_t attempts, std::uint64_t seed) const {
  if (attempts == 0) throw ConfigError("attempts", "must be at least 1");
  std::size_t nearest = 0;
  const double r = nearest_distance(z, &nearest) / lambda_;
  const double p = std::exp(-r * r);
  const std::string& molecule = templates_[nearest % templates_.size()];
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(attempts);
  for (std::size_t a = 0; a < attempts; ++a) {
    const double u = uniform01(rng);
    if (u < p) {
      out.push_back(molecule);
    } else if (u < p + kappa_ * (1.0 - p)) {
      out.emplace_back("C");
    } else {
      out.push_back(corrupt(molecule, rng()));
    }
  }
  return out;
}

std::string SyntheticDecoder::corrupt(const std::string& s, std::uint64_t seed) {
  Rng rng(seed);
  for (int tries = 0; tries < 16; ++tries) {
    std::string t = s;
    switch (uniform_index(rng, 4)) {
      case 0: {  // drop a ring-closure digit
        std::vector<std::size_t> digits;
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (std::isdigit(static_cast<unsigned char>(t[i])) && (i == 0 || t[i - 1] != '%') &&
              (i < 2 || t[i - 2] != '%')) {
            digits.push_back(i);
          }
        }
        if (digits.empty()) continue;
        t.erase(digits[uniform_index(rng, digits.size())], 1);
        break;
      }
      case 1: {  // unbalance a parenthesis
        std::vector<std::size_t> parens;
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (t[i] == '(' || t[i] == ')') parens.push_back(i);
        }
        if (parens.empty()) {
          t.insert(uniform_index(rng, t.size() + 1), 1, ')');
        } else {
          t.erase(parens[uniform_index(rng, parens.size())], 1);
        }
        break;
      }
      case 2:  // illegal character
        t.insert(uniform_index(rng, t.size() + 1), 1, '?');
        break;
      default:  // truncate, usually mid-token
        if (t.size() < 2) continue;
        t.resize(1 + uniform_index(rng, t.size() - 1));
        break;
    }
    if (!smiles::check_validity(t).valid) return t;
  }
  return s + ")";  // a stray closing parenthesis is always unbalanced
}

Matrix make_anchors(std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (n == 0 || dim == 0) throw ConfigError("anchors", "need n >= 1 and dim >= 1");
  Rng rng(seed);
  return standard_normal(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
}

const std::vector<std::string>& default_templates() {
  static const std::vector<std::string> pool = [] {
    std::vector<std::string> v;
    std::istringstream in{std::string(kTemplates)};
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line[0] != '#') v.push_back(line);
    }
    return v;
  }();
  return pool;
}

Matrix perturb_training_points(const Matrix& points, double noise_fraction, std::uint64_t seed) {
  if (!(noise_fraction >= 0.0)) throw ConfigError("noise_fraction", "must be non-negative");
  if (noise_fraction == 0.0) return points;
  Rng rng(seed);
  const Matrix g = standard_normal(rng, points.rows(), points.cols());
  return points.array() + noise_fraction * points.array().abs() * g.array();
}

void DiagnosticConfig::validate() const {
  if (points_per_group == 0) throw ConfigError("points_per_group", "must be positive");
  if (decode_attempts == 0) throw ConfigError("decode_attempts", "must be positive");
  random_bounds.validate();
}

std::vector<DiagnosticRow> diagnostic_experiment(const SyntheticDecoder& dec, const DiagnosticConfig& cfg) {
  cfg.validate();
  if (cfg.random_bounds.dim() != dec.dim()) throw DimensionError("random_bounds dimension differs from decoder");
  const std::size_t k = cfg.points_per_group;
  const auto n_anchor = static_cast<std::size_t>(dec.anchors().rows());
  if (n_anchor < 4 * k) throw ConfigError("points_per_group", "decoder needs at least 4 x points_per_group anchors");

  std::vector<std::size_t> order(n_anchor);
  for (std::size_t i = 0; i < n_anchor; ++i) order[i] = i;
  Rng rng(derive_seed(cfg.seed, 1));
  shuffle(order, rng);
  auto take = [&](std::size_t g) {
    Matrix m(static_cast<Eigen::Index>(k), dec.anchors().cols());
    for (std::size_t i = 0; i < k; ++i) m.row(static_cast<Eigen::Index>(i)) = dec.anchors().row(
        static_cast<Eigen::Index>(order[g * k + i]));
    return m;
  };

  struct Group {
    std::string name;
    Matrix points;
  };
  std::vector<Group> groups;
  groups.push_back({"train", take(0)});
  groups.push_back({"noise_1pct", perturb_training_points(take(1), 0.01, derive_seed(cfg.seed, 2))});
  groups.push_back({"noise_10pct", perturb_training_points(take(2), 0.10, derive_seed(cfg.seed, 3))});
  groups.push_back({"noise_50pct", perturb_training_points(take(3), 0.50, derive_seed(cfg.seed, 4))});
  Matrix far(static_cast<Eigen::Index>(k), dec.anchors().cols());
  Rng far_rng(derive_seed(cfg.seed, 5));
  for (Eigen::Index i = 0; i < far.rows(); ++i) far.row(i) = uniform_in(far_rng, cfg.random_bounds).transpose();
  groups.push_back({"random", far});

  std::vector<DiagnosticRow> rows;
  std::uint64_t point_index = 0;
  for (const Group& g : groups) {
    std::size_t valid = 0, methane = 0, druglike = 0, total = 0;
    for (Eigen::Index i = 0; i < g.points.rows(); ++i) {
      const auto outs = dec.decode(g.points.row(i).transpose(), cfg.decode_attempts,
                                   derive_seed(derive_seed(cfg.seed, 6), point_index++));
      for (const auto& s : outs) {
        const bool ok = smiles::check_validity(s).valid;
        valid += ok ? 1 : 0;
        methane += s == "C" ? 1 : 0;
        druglike += ok && smiles::is_drug_like(s) ? 1 : 0;
        ++total;
      }
    }
    const double n = static_cast<double>(total);
    rows.push_back({g.name, 100.0 * static_cast<double>(valid) / n, 100.0 * static_cast<double>(methane) / n,
                    100.0 * static_cast<double>(druglike) / n});
  }
  return rows;
}

void write_diagnostic_csv(std::ostream& out, const std::vector<DiagnosticRow>& rows) {
  out << "group,pct_valid,pct_methane,pct_druglike\n";
  for (const auto& r : rows) {
    out << r.group << ',' << format_pct(r.pct_valid) << ',' << format_pct(r.pct_methane) << ','
        << format_pct(r.pct_druglike) << '\n';
  }
}

std::vector<LabeledLatentPoint> generate_negative_class(const BoundedBox& bounds, std::size_t n_points,
                                                        std::size_t attempts, const SyntheticDecoder& dec,
                                                        std::uint64_t seed) {
  bounds.validate();
  if (bounds.dim() != dec.dim()) throw DimensionError("bounds dimension differs from decoder");
  Rng rng(derive_seed(seed, 0));
  std::vector<LabeledLatentPoint> out;
  out.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    LatentPoint z = uniform_in(rng, bounds);
    const int label = smiles::label_latent_point(dec.decode(z, attempts, derive_seed(derive_seed(seed, 1), i)));
    out.push_back(LabeledLatentPoint{std::move(z), label});
  }
  return out;
}

double composite_objective(const ComponentScores& c) { return c.primary - c.sa - c.ring_penalty; }

LatentObjective::LatentObjective(Matrix anchors, std::size_t bumps, double width, double noise_sd)
    : width_(width), noise_sd_(noise_sd) {
  if (bumps == 0 || static_cast<Eigen::Index>(bumps) > anchors.rows()) {
    throw ConfigError("bumps", "must lie in [1, number of anchors]");
  }
  if (!(width > 0.0)) throw ConfigError("width", "must be positive");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be non-negative");
  centers_ = anchors.topRows(static_cast<Eigen::Index>(bumps));
  heights_ = Vector::LinSpaced(static_cast<Eigen::Index>(bumps), 1.0, 2.0);
  if (bumps == 1) heights_[0] = 2.0;
}

double LatentObjective::mean(const Vector& z) const {
  if (z.size() != centers_.cols()) throw DimensionError("latent point has wrong dimension");
  const Vector d2 = (centers_.rowwise() - z.transpose()).rowwise().squaredNorm();
  return heights_.dot((-0.5 * d2.array() / (width_ * width_)).exp().matrix());
}

double LatentObjective::evaluate(const Vector& z, std::uint64_t seed) const {
  const double m = mean(z);
  if (noise_sd_ == 0.0) return m;
  Rng rng(seed);
  return m + noise_sd_ * standard_normal(rng, 1, 1)(0, 0);
}

double synthetic_latent_objective(const Vector& z, const Matrix& anchors, std::uint64_t seed) {
  return LatentObjective(anchors).evaluate(z, seed);
}

void TestbedConfig::validate() const {
  if (dim == 0) throw ConfigError("dim", "must be positive");
  if (anchors < 5) throw ConfigError("anchors", "need at least 5 anchors");
  if (!(validity_lengthscale > 0.0)) throw ConfigError("validity_lengthscale", "must be positive");
  if (!(methane_bias >= 0.0 && methane_bias <= 1.0)) throw ConfigError("methane_bias", "must lie in [0, 1]");
  if (!(box_half_width > 0.0)) throw ConfigError("box_half_width", "must be positive");
  if (decode_attempts == 0) throw ConfigError("decode_attempts", "must be positive");
}

TestbedConfig TestbedConfig::for_bo() {
  TestbedConfig cfg;
  cfg.dim = 16;
  cfg.validity_lengthscale = 5.0;
  return cfg;
}

TestbedProblem::TestbedProblem(const TestbedConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      decoder_(make_anchors(cfg.anchors, cfg.dim, derive_seed(cfg.seed, 1)), cfg.validity_lengthscale,
               cfg.methane_bias, default_templates()),
      objective_(decoder_.anchors()) {}

BoundedBox TestbedProblem::bounds() const {
  return BoundedBox::uniform(cfg_.dim, -cfg_.box_half_width, cfg_.box_half_width);
}

ProblemEvaluation TestbedProblem::evaluate(const LatentPoint& z, std::uint64_t seed) const {
  const std::vector<std::string> outs = decoder_.decode(z, cfg_.decode_attempts, derive_seed(seed, 0));
  // Most frequent decode; ties go to the one seen first.
  std::map<std::string, std::size_t> counts;
  const std::string* mode = nullptr;
  std::size_t best = 0;
  for (const auto& s : outs) {
    const std::size_t c = ++counts[s];
    if (c > best) {
      best = c;
      mode = &s;
    }
  }
  ProblemEvaluation e;
  e.constraint_satisfied = smiles::label_latent_point(outs) == 1;
  if (mode && smiles::check_validity(*mode).valid) e.objective = -objective_.evaluate(z, derive_seed(seed, 1));
  return e;
}

std::vector<LatentPoint> TestbedProblem::initial_design(std::size_t count, std::uint64_t /*seed*/) const {
  const Matrix& a = decoder_.anchors();
  std::vector<LatentPoint> pts;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(a.rows(), static_cast<Eigen::Index>(count)); ++i) {
    pts.push_back(a.row(i).transpose());
  }
  return pts;
}

std::vector<LabeledLatentPoint> TestbedProblem::constraint_pool(std::uint64_t seed) const {
  return generate_negative_class(bounds(), cfg_.negative_points, cfg_.decode_attempts, decoder_, seed);
}

BoConfig testbed_bo_config(std::size_t dim) {
  BoConfig c;
  c.iterations = 20;
  c.batch_size = 10;
  c.init_points = 500;
  c.constraint_architecture = BnnArchitecture::two_hidden(dim);
  c.constraint_training.minibatch_size = 100;
  c.constraint_training.mc_samples = 10;
  c.constraint_steps = 300;
  c.acquisition.restarts = 5;
  c.acquisition.max_quasi_newton_steps = 50;
  return c;
}

double drug_like_fraction(const BoTrace& trace) {
  std::size_t n = 0, good = 0;
  for (const auto& o : trace.observations) {
    if (o.iteration == 0) continue;
    ++n;
    good += o.constraint_satisfied ? 1 : 0;
  }
  return n == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(n);
}

}  // namespace cbo::testbed
