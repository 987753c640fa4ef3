#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbo::fixture {

inline std::string data_path(const std::string& rel) { return std::string(CBO_DATA_DIR) + "/" + rel; }

/// Lines of a fixture file; '#' lines are skipped, blank lines kept only if asked.
inline std::vector<std::string> read_lines(const std::string& rel, bool keep_blank = false) {
  std::ifstream in(data_path(rel));
  if (!in) throw std::runtime_error("missing fixture " + rel);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] == '#') continue;
    if (line.empty() && !keep_blank) continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace cbo::fixture
