// cbo: experiment runner.
//
//   cbo run --config exp.json [--seed N | --seeds A..B] [--output DIR]
//   cbo compare a/summary.json b/trace.csv [--output FILE]
//   cbo smiles-lint [FILE]
//
// Exit status: 0 success, 1 runtime failure, 2 invalid configuration or usage.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cbo/smiles.hpp"
#include "experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cbo;
using namespace cbo::cli;

constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

SeedRange parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw ConfigError("--seeds", "expected A..B");
  try {
    std::size_t used = 0;
    SeedRange r{std::stoull(s.substr(0, dots), &used), 0};
    if (used != dots) throw std::invalid_argument(s);
    const std::string tail = s.substr(dots + 2);
    r.last = std::stoull(tail, &used);
    if (used != tail.size()) throw std::invalid_argument(s);
    if (r.first > r.last) throw ConfigError("--seeds", "A must not exceed B");
    return r;
  } catch (const std::logic_error&) {
    throw ConfigError("--seeds", "expected A..B with non-negative integers, got '" + s + "'");
  }
}

std::string read_all(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& seeds, const std::optional<std::string>& output) {
  // Everything is validated before the first file is written.
  std::vector<ExperimentConfig> jobs;
  std::vector<fs::path> dirs;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot read '" + config_path + "'");
    const ExperimentConfig base = parse_config(read_all(in), config_path);
    Json doc = base.document;
    if (output) doc["output_dir"] = *output;
    const fs::path root = doc["output_dir"].get<std::string>();
    if (seeds) {
      const SeedRange r = parse_seed_range(*seeds);
      for (std::uint64_t s = r.first;; ++s) {
        Json d = doc;
        d["seed"] = s;
        jobs.push_back(resolve(std::move(d)));
        dirs.push_back(root / ("seed_" + std::to_string(s)));
        if (s == r.last) break;
      }
    } else {
      if (seed) doc["seed"] = *seed;
      jobs.push_back(resolve(std::move(doc)));
      dirs.push_back(root);
    }
  } catch (const ConfigError& e) {
    std::cerr << "cbo: invalid configuration: " << e.what() << "\n";
    return kUsage;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const ExperimentResult result = run_experiment(jobs[i]);
        write_artifacts(result, dirs[i]);
        std::lock_guard<std::mutex> lock(log);
        std::cout << dirs[i].string() << ": " << to_string(jobs[i].kind) << " seed " << jobs[i].seed << " done\n";
      } catch (const std::exception& e) {
        failed = true;
        std::lock_guard<std::mutex> lock(log);
        std::cerr << "cbo: " << to_string(jobs[i].kind) << " seed " << jobs[i].seed << " failed: " << e.what() << "\n";
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(jobs.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return failed ? kRuntimeFailure : 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::optional<std::string>& output) {
  Json result;
  try {
    result = compare_curves(load_curve(a), load_curve(b));
  } catch (const FormatError& e) {
    std::cerr << "cbo: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "cbo: " << e.what() << "\n";
    return kUsage;
  }
  result["a"]["source"] = a;
  result["b"]["source"] = b;
  const std::string text = result.dump(2) + "\n";
  if (output) {
    std::ofstream out(*output, std::ios::binary);
    if (!(out << text)) {
      std::cerr << "cbo: cannot write " << *output << "\n";
      return kRuntimeFailure;
    }
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_lint(const std::string& path) {
  std::ifstream file;
  if (path != "-") {
    file.open(path, std::ios::binary);
    if (!file) {
      std::cerr << "cbo: cannot read " << path << "\n";
      return kUsage;
    }
  }
  std::istream& in = path == "-" ? std::cin : file;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::cout << smiles::to_json(smiles::check_validity(line)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Bayesian optimization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds, run_output;
  CLI::App* run = app.add_subcommand("run", "Run one experiment (or a seed sweep) from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--seeds", seeds, "Seed sweep A..B, one subdirectory per seed")->excludes(seed_opt);
  run->add_option("--output", run_output, "Output directory (overrides output_dir)");

  std::string trace_a, trace_b;
  std::optional<std::string> compare_output;
  CLI::App* compare = app.add_subcommand("compare", "Compare best-feasible curves of two runs");
  compare->add_option("a", trace_a, "summary.json or trace.csv")->required();
  compare->add_option("b", trace_b, "summary.json or trace.csv")->required();
  compare->add_option("--output", compare_output, "Write the comparison here instead of stdout");

  std::string lint_path = "-";
  CLI::App* lint = app.add_subcommand("smiles-lint", "One JSON validity report per input line");
  lint->add_option("file", lint_path, "Input file; stdin when omitted or '-'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;  // --help exits 0
  }

  try {
    if (*run) return cmd_run(config_path, seed, seeds, run_output);
    if (*compare) return cmd_compare(trace_a, trace_b, compare_output);
    return cmd_lint(lint_path);
  } catch (const std::exception& e) {
    std::cerr << "cbo: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}
