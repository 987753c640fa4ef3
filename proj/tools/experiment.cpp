#include "experiment.hpp"

#include <chrono>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cbo/smiles.hpp"

namespace cbo::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKinds[] = {
    {ExperimentKind::branin_sequential, "branin_sequential"},
    {ExperimentKind::branin_parallel, "branin_parallel"},
    {ExperimentKind::branin_random, "branin_random"},
    {ExperimentKind::diagnostic, "diagnostic"},
    {ExperimentKind::testbed_constrained, "testbed_constrained"},
    {ExperimentKind::testbed_unconstrained, "testbed_unconstrained"},
    {ExperimentKind::smiles_lint, "smiles_lint"},
};

bool is_testbed_bo(ExperimentKind k) {
  return k == ExperimentKind::testbed_constrained || k == ExperimentKind::testbed_unconstrained;
}

Json bo_section(const BoConfig& c, const BnnArchitecture& arch) {
  Json hidden = Json::array();
  for (std::size_t i = 1; i + 1 < arch.layer_widths.size(); ++i) hidden.push_back(arch.layer_widths[i]);
  return Json{
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"init_points", c.init_points},
      {"delta", c.spec.delta},
      {"num_inducing", c.num_inducing},
      {"constraint_steps", c.constraint_steps},
      {"kb_augment_inducing", c.kb_augment_inducing},
      {"gp",
       {{"learning_rate", c.gp_training.learning_rate},
        {"epochs", c.gp_training.epochs},
        {"minibatch_size", c.gp_training.minibatch_size}}},
      {"constraint",
       {{"hidden_widths", hidden},
        {"activation", arch.hidden_activation == Activation::relu ? "relu" : "gaussian_rbf"},
        {"alpha", c.constraint_training.alpha},
        {"mc_samples", c.constraint_training.mc_samples},
        {"minibatch_size", c.constraint_training.minibatch_size},
        {"learning_rate", c.constraint_training.learning_rate},
        {"epochs", c.constraint_training.epochs},
        {"prior_variance", c.constraint_training.prior_variance},
        {"vb_limit", c.constraint_training.vb_limit}}},
      {"acquisition",
       {{"restarts", c.acquisition.restarts},
        {"max_quasi_newton_steps", c.acquisition.max_quasi_newton_steps},
        {"convergence_tolerance", c.acquisition.convergence_tolerance},
        {"constraint_mc_samples", c.acquisition.constraint_mc_samples}}},
  };
}

Json testbed_section(const testbed::TestbedConfig& t) {
  return Json{
      {"dim", t.dim},
      {"anchors", t.anchors},
      {"validity_lengthscale", t.validity_lengthscale},
      {"methane_bias", t.methane_bias},
      {"box_half_width", t.box_half_width},
      {"decode_attempts", t.decode_attempts},
      {"negative_points", t.negative_points},
      {"seed", t.seed},
  };
}

std::string type_name(const Json& j) {
  if (j.is_boolean()) return "a boolean";
  if (j.is_number_unsigned()) return "a non-negative integer";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array of non-negative integers";
  return "an object";
}

bool same_type(const Json& def, const Json& val) {
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_number_unsigned()) return val.is_number_unsigned();
  if (def.is_number()) return val.is_number();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) {
    if (!val.is_array()) return false;
    for (const Json& x : val) {
      if (!x.is_number_unsigned()) return false;
    }
    return true;
  }
  return val.is_object();
}

void overlay(Json& target, const Json& user, const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError(key, "unknown key");
    Json& slot = target[it.key()];
    if (!same_type(slot, it.value())) throw ConfigError(key, "must be " + type_name(slot));
    if (slot.is_object()) {
      overlay(slot, it.value(), key);
    } else if (slot.is_number_float()) {
      slot = it.value().get<double>();  // keep the echo typed as a real
    } else {
      slot = it.value();
    }
  }
}

// Re-raises a library ConfigError with the section prefix on its field.
template <typename F>
void checked(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    std::string what = e.what();
    if (!e.field().empty() && what.rfind(e.field() + ": ", 0) == 0) what = what.substr(e.field().size() + 2);
    throw ConfigError(e.field().empty() ? section : section + "." + e.field(), what);
  } catch (const Error& e) {
    throw ConfigError(section, e.what());
  }
}

BoConfig read_bo(const Json& j, std::size_t dim) {
  BoConfig c;
  c.iterations = j["iterations"].get<std::size_t>();
  c.batch_size = j["batch_size"].get<std::size_t>();
  c.init_points = j["init_points"].get<std::size_t>();
  c.spec.delta = j["delta"].get<double>();
  c.num_inducing = j["num_inducing"].get<std::size_t>();
  c.constraint_steps = j["constraint_steps"].get<std::size_t>();
  c.kb_augment_inducing = j["kb_augment_inducing"].get<bool>();
  const Json& gp = j["gp"];
  c.gp_training.learning_rate = gp["learning_rate"].get<double>();
  c.gp_training.epochs = gp["epochs"].get<std::size_t>();
  c.gp_training.minibatch_size = gp["minibatch_size"].get<std::size_t>();
  const Json& con = j["constraint"];
  c.constraint_architecture.layer_widths = {dim};
  for (const Json& w : con["hidden_widths"]) c.constraint_architecture.layer_widths.push_back(w.get<std::size_t>());
  c.constraint_architecture.layer_widths.push_back(1);
  const std::string act = con["activation"].get<std::string>();
  if (act == "relu") {
    c.constraint_architecture.hidden_activation = Activation::relu;
  } else if (act == "gaussian_rbf") {
    c.constraint_architecture.hidden_activation = Activation::gaussian_rbf;
  } else {
    throw ConfigError("constraint.activation", "must be \"relu\" or \"gaussian_rbf\"");
  }
  c.constraint_training.alpha = con["alpha"].get<double>();
  c.constraint_training.mc_samples = con["mc_samples"].get<std::size_t>();
  c.constraint_training.minibatch_size = con["minibatch_size"].get<std::size_t>();
  c.constraint_training.learning_rate = con["learning_rate"].get<double>();
  c.constraint_training.epochs = con["epochs"].get<std::size_t>();
  c.constraint_training.prior_variance = con["prior_variance"].get<double>();
  c.constraint_training.vb_limit = con["vb_limit"].get<bool>();
  const Json& acq = j["acquisition"];
  c.acquisition.restarts = acq["restarts"].get<std::size_t>();
  c.acquisition.max_quasi_newton_steps = acq["max_quasi_newton_steps"].get<std::size_t>();
  c.acquisition.convergence_tolerance = acq["convergence_tolerance"].get<double>();
  c.acquisition.constraint_mc_samples = acq["constraint_mc_samples"].get<std::size_t>();
  if (c.iterations == 0) throw ConfigError("iterations", "must be positive");
  if (c.constraint_training.prior_variance <= 0.0) throw ConfigError("constraint.prior_variance", "must be positive");
  c.validate();
  return c;
}

testbed::TestbedConfig read_testbed(const Json& j) {
  testbed::TestbedConfig t;
  t.dim = j["dim"].get<std::size_t>();
  t.anchors = j["anchors"].get<std::size_t>();
  t.validity_lengthscale = j["validity_lengthscale"].get<double>();
  t.methane_bias = j["methane_bias"].get<double>();
  t.box_half_width = j["box_half_width"].get<double>();
  t.decode_attempts = j["decode_attempts"].get<std::size_t>();
  t.negative_points = j["negative_points"].get<std::size_t>();
  t.seed = j["seed"].get<std::uint64_t>();
  t.validate();
  return t;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json curve_json(const std::vector<std::optional<double>>& curve) {
  Json a = Json::array();
  for (const auto& v : curve) a.push_back(optional_number(v));
  return a;
}

void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKinds) {
    if (n == name) return k;
  }
  return std::nullopt;
}

Json default_config(ExperimentKind kind) {
  Json j{{"experiment", std::string(to_string(kind))}, {"seed", std::uint64_t{0}}, {"output_dir", "."}};
  const branin::Disk disk;
  const Json disk_json{{"disk",
                        {{"center_x1", disk.center_x1},
                         {"center_x2", disk.center_x2},
                         {"radius_sq", disk.radius_sq}}}};
  switch (kind) {
    case ExperimentKind::branin_parallel: {
      const BoConfig c;  // 10 init points, 10 iterations of batch 5
      j["bo"] = bo_section(c, BnnArchitecture::single_hidden(2));
      j["branin"] = disk_json;
      break;
    }
    case ExperimentKind::branin_sequential: {
      BoConfig c;
      c.init_points = 50;
      c.iterations = 40;
      c.batch_size = 1;
      c.num_inducing = 20;
      j["bo"] = bo_section(c, BnnArchitecture::single_hidden(2));
      j["branin"] = disk_json;
      break;
    }
    case ExperimentKind::branin_random:
      j["random"] = Json{{"budget", std::size_t{60}}};
      j["branin"] = disk_json;
      break;
    case ExperimentKind::diagnostic: {
      const testbed::DiagnosticConfig d;
      j["testbed"] = testbed_section(testbed::TestbedConfig{});
      j["diagnostic"] = Json{{"points_per_group", d.points_per_group}, {"decode_attempts", d.decode_attempts}};
      break;
    }
    case ExperimentKind::testbed_constrained:
    case ExperimentKind::testbed_unconstrained: {
      const testbed::TestbedConfig t = testbed::TestbedConfig::for_bo();
      const BoConfig c = testbed::testbed_bo_config(t.dim);
      j["bo"] = bo_section(c, c.constraint_architecture);
      j["testbed"] = testbed_section(t);
      break;
    }
    case ExperimentKind::smiles_lint:
      j["smiles_lint"] = Json{{"input", ""}};
      break;
  }
  return j;
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  Json user;
  try {
    user = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // e.what() carries "line L, column C"
    throw ConfigError("", source + ": " + e.what());
  }
  if (!user.is_object()) throw ConfigError("", source + ": top level must be a JSON object");
  if (!user.contains("experiment") || !user["experiment"].is_string()) {
    throw ConfigError("experiment", "required string");
  }
  const auto kind = parse_kind(user["experiment"].get<std::string>());
  if (!kind) throw ConfigError("experiment", "unknown experiment '" + user["experiment"].get<std::string>() + "'");
  Json doc = default_config(*kind);
  overlay(doc, user, "");
  return resolve(std::move(doc));
}

ExperimentConfig resolve(Json document) {
  ExperimentConfig cfg;
  const auto kind = parse_kind(document["experiment"].get<std::string>());
  if (!kind) throw ConfigError("experiment", "unknown experiment");
  cfg.kind = *kind;
  cfg.seed = document["seed"].get<std::uint64_t>();
  cfg.output_dir = document["output_dir"].get<std::string>();
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  if (document.contains("testbed")) checked("testbed", [&] { cfg.testbed = read_testbed(document["testbed"]); });
  if (document.contains("branin")) {
    checked("branin.disk", [&] {
      const Json& d = document["branin"]["disk"];
      cfg.disk = branin::Disk{d["center_x1"].get<double>(), d["center_x2"].get<double>(),
                              d["radius_sq"].get<double>()};
      if (!(cfg.disk.radius_sq > 0.0)) throw ConfigError("radius_sq", "must be positive");
      branin::check_disk_eliminates_minima(cfg.disk);
    });
  }
  if (document.contains("bo")) {
    const std::size_t dim = is_testbed_bo(cfg.kind) ? cfg.testbed.dim : 2;
    checked("bo", [&] { cfg.bo = read_bo(document["bo"], dim); });
    cfg.bo.seed = cfg.seed;
  }
  if (document.contains("random")) {
    cfg.random_budget = document["random"]["budget"].get<std::size_t>();
    if (cfg.random_budget == 0) throw ConfigError("random.budget", "must be at least 1");
  }
  if (document.contains("diagnostic")) {
    checked("diagnostic", [&] {
      cfg.diagnostic.points_per_group = document["diagnostic"]["points_per_group"].get<std::size_t>();
      cfg.diagnostic.decode_attempts = document["diagnostic"]["decode_attempts"].get<std::size_t>();
      cfg.diagnostic.seed = cfg.seed;
      cfg.diagnostic.random_bounds =
          BoundedBox::uniform(cfg.testbed.dim, -cfg.testbed.box_half_width, cfg.testbed.box_half_width);
      cfg.diagnostic.validate();
      if (cfg.testbed.anchors < 4 * cfg.diagnostic.points_per_group) {
        throw ConfigError("points_per_group", "needs testbed.anchors >= 4 x points_per_group");
      }
    });
  }
  if (document.contains("smiles_lint")) {
    cfg.lint_input = document["smiles_lint"]["input"].get<std::string>();
    if (cfg.lint_input.empty()) throw ConfigError("smiles_lint.input", "path required");
    if (!fs::is_regular_file(cfg.lint_input)) {
      throw ConfigError("smiles_lint.input", "no such file '" + cfg.lint_input.string() + "'");
    }
  }
  cfg.document = std::move(document);
  return cfg;
}

std::vector<std::optional<double>> best_feasible_per_evaluation(const BoTrace& trace) {
  std::vector<std::optional<double>> out;
  out.reserve(trace.observations.size());
  std::optional<double> best;
  for (const auto& o : trace.observations) {
    if (o.constraint_satisfied && o.objective && (!best || *o.objective < *best)) best = o.objective;
    out.push_back(best);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult r;
  Json extra = Json::object();
  switch (cfg.kind) {
    case ExperimentKind::branin_sequential:
    case ExperimentKind::branin_parallel:
      r.trace = run_constrained_bo(branin::BraninProblem(cfg.disk), cfg.bo);
      break;
    case ExperimentKind::branin_random:
      r.trace = random_sampling_baseline(branin::BraninProblem(cfg.disk), cfg.random_budget, cfg.seed);
      break;
    case ExperimentKind::testbed_constrained:
    case ExperimentKind::testbed_unconstrained: {
      const testbed::TestbedProblem problem(cfg.testbed);
      r.trace = cfg.kind == ExperimentKind::testbed_constrained ? run_constrained_bo(problem, cfg.bo)
                                                                : run_unconstrained_bo(problem, cfg.bo);
      extra["drug_like_fraction"] = testbed::drug_like_fraction(*r.trace);
      break;
    }
    case ExperimentKind::diagnostic: {
      const testbed::TestbedProblem problem(cfg.testbed);
      r.diagnostic = testbed::diagnostic_experiment(problem.decoder(), cfg.diagnostic);
      Json rows = Json::array();
      for (const auto& row : r.diagnostic) {
        rows.push_back(Json{{"group", row.group},
                            {"pct_valid", row.pct_valid},
                            {"pct_methane", row.pct_methane},
                            {"pct_druglike", row.pct_druglike}});
      }
      extra["groups"] = rows;
      break;
    }
    case ExperimentKind::smiles_lint: {
      std::istringstream in(read_file(cfg.lint_input));
      std::size_t valid = 0;
      for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const smiles::ValidityReport rep = smiles::check_validity(line);
        valid += rep.valid ? 1 : 0;
        r.lint_lines.push_back(smiles::to_json(rep));
      }
      extra["lines"] = r.lint_lines.size();
      extra["valid"] = valid;
      extra["invalid"] = r.lint_lines.size() - valid;
      break;
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json& s = r.summary;
  s["experiment"] = std::string(to_string(cfg.kind));
  s["seed"] = cfg.seed;
  s["config"] = cfg.document;
  s["wall_time_seconds"] = seconds;
  if (r.trace) {
    s["evaluations"] = r.trace->observations.size();
    s["best_feasible"] = optional_number(r.trace->best_feasible());
    s["best_feasible_per_iteration"] = curve_json(r.trace->best_feasible_per_iteration);
    s["best_feasible_per_evaluation"] = curve_json(best_feasible_per_evaluation(*r.trace));
    s["degraded_acquisitions"] = r.trace->degraded_acquisitions;
    s["gp_fit_fallbacks"] = r.trace->gp_fit_fallbacks;
    s["constraint_fit_fallbacks"] = r.trace->constraint_fit_fallbacks;
  }
  for (auto it = extra.begin(); it != extra.end(); ++it) s[it.key()] = it.value();
  return r;
}

std::string trace_csv(const BoTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

std::string diagnostic_csv(const std::vector<testbed::DiagnosticRow>& rows) {
  std::ostringstream out;
  testbed::write_diagnostic_csv(out, rows);
  return out.str();
}

void write_artifacts(const ExperimentResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  if (result.trace) write_file(dir / "trace.csv", trace_csv(*result.trace));
  if (!result.diagnostic.empty()) write_file(dir / "diagnostic.csv", diagnostic_csv(result.diagnostic));
  if (result.summary.value("experiment", "") == "smiles_lint") {
    std::string lines;
    for (const auto& l : result.lint_lines) lines += l + "\n";
    write_file(dir / "lint.jsonl", lines);
  }
  write_file(dir / "summary.json", result.summary.dump(2) + "\n");
}

std::vector<std::optional<double>> load_curve(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::optional<double>> curve;
  if (path.extension() == ".json") {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("best_feasible_per_evaluation") ||
        !j["best_feasible_per_evaluation"].is_array()) {
      throw FormatError(path.string() + ": no best_feasible_per_evaluation array");
    }
    for (const Json& v : j["best_feasible_per_evaluation"]) {
      if (v.is_null()) {
        curve.push_back(std::nullopt);
      } else if (v.is_number()) {
        curve.push_back(v.get<double>());
      } else {
        throw FormatError(path.string() + ": best_feasible_per_evaluation holds a non-number");
      }
    }
    return curve;
  }

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iteration,", 0) != 0) {
    throw FormatError(path.string() + ": not a trace CSV (header must start with 'iteration,')");
  }
  std::optional<double> best;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto last = line.rfind(',');
    const auto prev = last == std::string::npos ? std::string::npos : line.rfind(',', last - 1);
    if (prev == std::string::npos) throw FormatError(path.string() + ": row " + std::to_string(row) + " is short");
    const std::string_view label = std::string_view(line).substr(last + 1);
    const std::string_view obj = std::string_view(line).substr(prev + 1, last - prev - 1);
    if (label != "0" && label != "1") throw FormatError(path.string() + ": bad label on row " + std::to_string(row));
    std::optional<double> value;
    if (!obj.empty()) {
      value = parse_real(obj);
      if (!value) throw FormatError(path.string() + ": bad objective on row " + std::to_string(row));
    }
    if (label == "1" && value && (!best || *value < *best)) best = value;
    curve.push_back(best);
  }
  return curve;
}

Json compare_curves(const std::vector<std::optional<double>>& a, const std::vector<std::optional<double>>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("budget mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                          " evaluations");
  }
  Json delta = Json::array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    delta.push_back(a[i] && b[i] ? Json(*a[i] - *b[i]) : Json(nullptr));
  }
  Json out;
  out["evaluations"] = a.size();
  out["a"] = Json{{"best_feasible", a.empty() ? Json(nullptr) : optional_number(a.back())},
                  {"best_feasible_per_evaluation", curve_json(a)}};
  out["b"] = Json{{"best_feasible", b.empty() ? Json(nullptr) : optional_number(b.back())},
                  {"best_feasible_per_evaluation", curve_json(b)}};
  out["final_delta"] = delta.empty() ? Json(nullptr) : delta.back();
  out["delta_per_evaluation"] = delta;
  return out;
}

}  // namespace cbo::cli
