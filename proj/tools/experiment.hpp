#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cbo/bo_engine.hpp"
#include "cbo/branin.hpp"
#include "cbo/errors.hpp"
#include "cbo/testbed.hpp"

namespace cbo::cli {

using Json = nlohmann::ordered_json;

enum class ExperimentKind {
  branin_sequential,
  branin_parallel,
  branin_random,
  diagnostic,
  testbed_constrained,
  testbed_unconstrained,
  smiles_lint,
};

std::string_view to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view name);

/// Full default document for one experiment. A user config may only set keys
/// that appear here, with the same JSON type.
Json default_config(ExperimentKind kind);

/// Resolved configuration. `document` is the merged JSON, echoed into every summary.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::branin_parallel;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";
  BoConfig bo;
  branin::Disk disk;
  std::size_t random_budget = 60;
  testbed::TestbedConfig testbed;
  testbed::DiagnosticConfig diagnostic;
  std::filesystem::path lint_input;
  Json document;
};

/// Parses and validates a config document. `source` names the file in
/// messages. Throws ConfigError, naming the line and column for syntax
/// errors and the dotted key path otherwise.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "config");

/// Re-derives every typed field from cfg.document after it was edited
/// (seed and output overrides go through here).
ExperimentConfig resolve(Json document);

struct ExperimentResult {
  std::optional<BoTrace> trace;
  std::vector<testbed::DiagnosticRow> diagnostic;
  std::vector<std::string> lint_lines;  // one JSON object per input line
  Json summary;
};

/// Runs the experiment in memory. Library errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// trace.csv / diagnostic.csv / lint.jsonl and summary.json, each written to
/// a temporary name first and renamed into place.
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

std::string trace_csv(const BoTrace& trace);
std::string diagnostic_csv(const std::vector<testbed::DiagnosticRow>& rows);

/// Best feasible value after each evaluation, in order.
std::vector<std::optional<double>> best_feasible_per_evaluation(const BoTrace& trace);

/// Reads the per-evaluation best-feasible curve from a summary.json or a
/// trace.csv. Throws FormatError.
std::vector<std::optional<double>> load_curve(const std::filesystem::path& path);

/// Per-evaluation deltas (a - b) and final values. Throws ValidationError
/// when the curves differ in length.
Json compare_curves(const std::vector<std::optional<double>>& a, const std::vector<std::optional<double>>& b);

}  // namespace cbo::cli
